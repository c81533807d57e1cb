#include "tender/pipeline/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <nlohmann/json.hpp>
#include <random>
#include <tuple>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"

namespace tender::pipeline {

using nlohmann::json;

void sort_records(std::vector<NoticeRecord>& records) {
  auto key = [](const NoticeRecord& r) {
    return std::tie(r.source, r.date, r.page, r.bbox.y, r.bbox.x, r.bbox.h, r.bbox.w);
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const NoticeRecord& a, const NoticeRecord& b) { return key(a) < key(b); });
}

std::string manifest_to_json(const Manifest& m) {
  json records = json::array();
  for (const auto& r : m.records) {
    records.push_back({{"source", r.source},
                       {"date", r.date},
                       {"page", r.page},
                       {"bbox", {{"x", r.bbox.x}, {"y", r.bbox.y}, {"w", r.bbox.w}, {"h", r.bbox.h}}},
                       {"crop_path", r.crop_path},
                       {"score", r.score},
                       {"matched_keywords", r.matched_keywords},
                       {"common_count", r.common_count},
                       {"decided", r.decided},
                       {"extracted_at", r.extracted_at}});
  }
  json doc = {{"schema_version", m.schema_version},
              {"run_id", m.run_id},
              {"created_at", m.created_at},
              {"config_hash", m.config_hash},
              {"records", records}};
  return doc.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text) {
  try {
    const json doc = json::parse(text);
    Manifest m;
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error(ErrorCode::VersionMismatch, "manifest schema " + std::to_string(m.schema_version));
    }
    m.run_id = doc.at("run_id").get<std::string>();
    m.created_at = doc.at("created_at").get<std::string>();
    m.config_hash = doc.at("config_hash").get<std::string>();
    for (const auto& r : doc.at("records")) {
      NoticeRecord rec;
      rec.source = r.at("source").get<std::string>();
      rec.date = r.at("date").get<std::string>();
      rec.page = r.at("page").get<int>();
      const auto& b = r.at("bbox");
      rec.bbox = {b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
      rec.crop_path = r.at("crop_path").get<std::string>();
      rec.score = r.at("score").get<double>();
      rec.matched_keywords = r.at("matched_keywords").get<std::vector<std::string>>();
      rec.common_count = r.at("common_count").get<int>();
      rec.decided = r.value("decided", true);
      rec.extracted_at = r.value("extracted_at", std::string{});
      m.records.push_back(std::move(rec));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("manifest: ") + e.what());
  }
}

void export_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

Manifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }

Manifest without_volatile_fields(Manifest m) {
  m.run_id.clear();
  m.created_at.clear();
  for (auto& r : m.records) r.extracted_at.clear();
  return m;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_run_id() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  std::random_device rd;
  char suffix[16];
  std::snprintf(suffix, sizeof(suffix), "%08x", rd());
  return std::string(stamp) + "-" + suffix;
}

}  // namespace tender::pipeline
