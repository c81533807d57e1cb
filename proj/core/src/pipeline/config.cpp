#include "tender/pipeline/config.hpp"

#include <functional>
#include <map>
#include <nlohmann/json.hpp>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"
#include "tender/hash.hpp"

namespace tender::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  for (const auto& s : sources) s.validate();
  if (dpi < 1) throw Error(ErrorCode::ConfigError, "dpi must be >= 1");
  segmentation.validate();
  if (model.input_size != 224 && model.input_size != 112 && model.input_size != 64) {
    throw Error(ErrorCode::ConfigError, "model.input_size must be 224, 112 or 64");
  }
  train.validate();
  if (train_data.samples < 4) throw Error(ErrorCode::ConfigError, "train.samples must be >= 4");
  if (!(train_data.test_fraction > 0.0 && train_data.test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "train.test_fraction must be in (0, 1)");
  }
  if (min_common < 0) throw Error(ErrorCode::ConfigError, "min_common must be >= 0");
  if (port < 0 || port > 65535) throw Error(ErrorCode::ConfigError, "serve.port out of range");
}

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

template <typename T>
T get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "' has the wrong type");
  }
}

fetch::SourceConfig parse_source(const json& j, const fs::path& base) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "each source must be an object");
  fetch::SourceConfig s;
  for (const auto& [key, v] : j.items()) {
    const std::string k = "sources[]." + key;
    if (key == "name") s.name = get<std::string>(v, k);
    else if (key == "index_url") s.index_url = get<std::string>(v, k);
    else if (key == "link_class") s.link_class = get<std::string>(v, k);
    else if (key == "download_dir") s.download_dir = get<std::string>(v, k);
    else if (key == "poll_interval_ms") s.poll_interval_ms = get<int>(v, k);
    else if (key == "timeout_ms") s.timeout_ms = get<int>(v, k);
    else if (key == "user_agent") s.user_agent = get<std::string>(v, k);
    else if (key == "polite_delay_ms") s.polite_delay_ms = get<int>(v, k);
    else throw Error(ErrorCode::ConfigError, "unknown key '" + k + "'");
  }
  s.download_dir = resolve(base, s.download_dir);
  return s;
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");

  PipelineConfig c;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"sources",
       [&](const json& v, const std::string& k) {
         if (!v.is_array()) throw Error(ErrorCode::ConfigError, "'" + k + "' must be an array");
         for (const auto& s : v) c.sources.push_back(parse_source(s, base_dir));
       }},
      {"dpi", [&](const json& v, const std::string& k) { c.dpi = get<int>(v, k); }},
      {"rasterizer.command", [&](const json& v, const std::string& k) { c.rasterizer_command = get<std::string>(v, k); }},
      {"segmentation.min_w",
       [&](const json& v, const std::string& k) {
         if (v.is_null()) c.segmentation.min_w.reset();
         else c.segmentation.min_w = get<int>(v, k);
       }},
      {"segmentation.min_h",
       [&](const json& v, const std::string& k) {
         if (v.is_null()) c.segmentation.min_h.reset();
         else c.segmentation.min_h = get<int>(v, k);
       }},
      {"segmentation.max_frac", [&](const json& v, const std::string& k) { c.segmentation.max_frac = get<double>(v, k); }},
      {"segmentation.threshold",
       [&](const json& v, const std::string& k) {
         if (v.is_string() && v.get<std::string>() == "auto") {
           c.segmentation.threshold = image::kAutoThreshold;
           return;
         }
         const int t = get<int>(v, k);
         if (t < 0 || t > 255) throw Error(ErrorCode::ConfigError, "'" + k + "' must be 0-255 or \"auto\"");
         c.segmentation.threshold = static_cast<std::uint8_t>(t);
       }},
      {"segmentation.invert", [&](const json& v, const std::string& k) { c.segmentation.invert = get<bool>(v, k); }},
      {"segmentation.rect_tol", [&](const json& v, const std::string& k) { c.segmentation.rect_tol = get<double>(v, k); }},
      {"segmentation.connectivity",
       [&](const json& v, const std::string& k) { c.segmentation.connectivity = get<int>(v, k); }},
      {"model.arch",
       [&](const json& v, const std::string& k) {
         const auto a = nn::parse_arch(get<std::string>(v, k));
         if (!a) throw Error(ErrorCode::ConfigError, "'" + k + "' must be resnet, googlenet or xception");
         c.model.arch = *a;
       }},
      {"model.input_size", [&](const json& v, const std::string& k) { c.model.input_size = get<std::size_t>(v, k); }},
      {"model.preset",
       [&](const json& v, const std::string& k) {
         const auto p = nn::parse_preset(get<std::string>(v, k));
         if (!p) throw Error(ErrorCode::ConfigError, "'" + k + "' must be paper or tiny");
         c.model.preset = *p;
       }},
      {"model.weights", [&](const json& v, const std::string& k) { c.model.weights = get<std::string>(v, k); }},
      {"train.epochs", [&](const json& v, const std::string& k) { c.train.epochs = get<int>(v, k); }},
      {"train.batch_size", [&](const json& v, const std::string& k) { c.train.batch_size = get<std::size_t>(v, k); }},
      {"train.learning_rate", [&](const json& v, const std::string& k) { c.train.learning_rate = get<double>(v, k); }},
      {"train.optimizer",
       [&](const json& v, const std::string& k) {
         const auto s = get<std::string>(v, k);
         if (s == "adam") c.train.optimizer = nn::Optimizer::Adam;
         else if (s == "sgd") c.train.optimizer = nn::Optimizer::SgdMomentum;
         else throw Error(ErrorCode::ConfigError, "'" + k + "' must be adam or sgd");
       }},
      {"train.momentum", [&](const json& v, const std::string& k) { c.train.momentum = get<double>(v, k); }},
      {"train.seed", [&](const json& v, const std::string& k) { c.train.seed = get<std::uint64_t>(v, k); }},
      {"train.checkpoint_epochs",
       [&](const json& v, const std::string& k) { c.train.checkpoint_epochs = get<std::vector<int>>(v, k); }},
      {"train.samples", [&](const json& v, const std::string& k) { c.train_data.samples = get<int>(v, k); }},
      {"train.test_fraction", [&](const json& v, const std::string& k) { c.train_data.test_fraction = get<double>(v, k); }},
      {"train.out_dir", [&](const json& v, const std::string& k) { c.train_data.out_dir = get<std::string>(v, k); }},
      {"ocr.command", [&](const json& v, const std::string& k) { c.ocr_command = get<std::string>(v, k); }},
      {"ocr.min_conf", [&](const json& v, const std::string& k) { c.min_conf = get<double>(v, k); }},
      {"keywords", [&](const json& v, const std::string& k) { c.keywords = get<std::string>(v, k); }},
      {"min_common", [&](const json& v, const std::string& k) { c.min_common = get<int>(v, k); }},
      {"manifest", [&](const json& v, const std::string& k) { c.manifest = get<std::string>(v, k); }},
      {"work_dir", [&](const json& v, const std::string& k) { c.work_dir = get<std::string>(v, k); }},
      {"date", [&](const json& v, const std::string& k) { c.date = get<std::string>(v, k); }},
      {"serve.port", [&](const json& v, const std::string& k) { c.port = get<int>(v, k); }},
      {"debug.rejects", [&](const json& v, const std::string& k) { c.debug_rejects = get<bool>(v, k); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    it->second(value, key);
  }
  c.model.weights = resolve(base_dir, c.model.weights);
  c.train_data.out_dir = resolve(base_dir, c.train_data.out_dir);
  c.keywords = resolve(base_dir, c.keywords);
  c.manifest = resolve(base_dir, c.manifest);
  c.work_dir = resolve(base_dir, c.work_dir);
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  }
  return parse_config(text, path.parent_path().empty() ? fs::current_path() : fs::absolute(path).parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
  json sources = json::array();
  for (const auto& s : c.sources) {
    sources.push_back({{"name", s.name},
                       {"index_url", s.index_url},
                       {"link_class", s.link_class},
                       {"download_dir", s.download_dir.string()},
                       {"poll_interval_ms", s.poll_interval_ms},
                       {"timeout_ms", s.timeout_ms},
                       {"user_agent", s.user_agent},
                       {"polite_delay_ms", s.polite_delay_ms}});
  }
  const auto& sp = c.segmentation;
  json doc = {
      {"sources", sources},
      {"dpi", c.dpi},
      {"rasterizer.command", c.rasterizer_command},
      {"segmentation.min_w", sp.min_w ? json(*sp.min_w) : json(nullptr)},
      {"segmentation.min_h", sp.min_h ? json(*sp.min_h) : json(nullptr)},
      {"segmentation.max_frac", sp.max_frac},
      {"segmentation.threshold", sp.threshold ? json(static_cast<int>(*sp.threshold)) : json("auto")},
      {"segmentation.invert", sp.invert},
      {"segmentation.rect_tol", sp.rect_tol},
      {"segmentation.connectivity", sp.connectivity},
      {"model.arch", std::string(nn::to_string(c.model.arch))},
      {"model.input_size", c.model.input_size},
      {"model.preset", std::string(nn::to_string(c.model.preset))},
      {"model.weights", c.model.weights.string()},
      {"train.epochs", c.train.epochs},
      {"train.batch_size", c.train.batch_size},
      {"train.learning_rate", c.train.learning_rate},
      {"train.optimizer", c.train.optimizer == nn::Optimizer::Adam ? "adam" : "sgd"},
      {"train.momentum", c.train.momentum},
      {"train.seed", c.train.seed},
      {"train.checkpoint_epochs", c.train.checkpoint_epochs},
      {"train.samples", c.train_data.samples},
      {"train.test_fraction", c.train_data.test_fraction},
      {"train.out_dir", c.train_data.out_dir.string()},
      {"ocr.command", c.ocr_command},
      {"ocr.min_conf", c.min_conf},
      {"keywords", c.keywords.string()},
      {"min_common", c.min_common},
      {"manifest", c.manifest.string()},
      {"work_dir", c.work_dir.string()},
      {"date", c.date},
      {"serve.port", c.port},
      {"debug.rejects", c.debug_rejects},
  };
  return doc.dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& config) { return sha256_hex(config_to_json(config)); }

}  // namespace tender::pipeline
