#include "tender/nn/weights.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <map>

#include "tender/fsutil.hpp"

namespace tender::nn {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'D', 'R'};
constexpr std::string_view kModelRecord = "@model";

struct Record {
  Shape dims;
  std::vector<float> values;
};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_record(std::string& out, std::string_view name, const Shape& dims, std::span<const double> values) {
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t crc_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::CorruptFile, path_ + ": truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }
  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(s[0]) | (static_cast<unsigned char>(s[1]) << 8));
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

 private:
  std::string_view bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::map<std::string, Record> parse_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::CorruptFile, name + ": bad magic");
  }
  if (static_cast<unsigned char>(bytes[4]) != kWeightsVersion) {
    throw Error(ErrorCode::VersionMismatch, name + ": format version " +
                                                std::to_string(static_cast<unsigned char>(bytes[4])) + ", expected " +
                                                std::to_string(kWeightsVersion));
  }
  if (bytes.size() < 9) throw Error(ErrorCode::CorruptFile, name + ": truncated");
  const std::string_view payload(bytes.data() + 5, bytes.size() - 9);
  Reader crc_reader(std::string_view(bytes).substr(bytes.size() - 4), name);
  if (crc_reader.u32() != crc_of(payload)) throw Error(ErrorCode::CorruptFile, name + ": checksum mismatch");

  std::map<std::string, Record> records;
  Reader r(payload, name);
  while (!r.done()) {
    std::string key(r.take(r.u16()));
    Record rec;
    const std::uint8_t rank = r.u8();
    for (int i = 0; i < rank; ++i) rec.dims.push_back(r.u32());
    const std::size_t n = shape_size(rec.dims);
    rec.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rec.values.push_back(std::bit_cast<float>(r.u32()));
    if (!records.emplace(key, std::move(rec)).second) {
      throw Error(ErrorCode::CorruptFile, name + ": duplicate tensor " + key);
    }
  }
  return records;
}

void assign(Model& model, std::map<std::string, Record>& records, const std::string& path) {
  auto params = model.parameters();
  if (records.size() != params.size() + 1) {
    throw Error(ErrorCode::CorruptFile, path + ": holds " + std::to_string(records.size() - 1) +
                                            " tensors, model has " + std::to_string(params.size()));
  }
  for (auto& np : params) {
    auto it = records.find(np.name);
    if (it == records.end()) throw Error(ErrorCode::CorruptFile, path + ": missing tensor " + np.name);
    if (it->second.dims != np.param->value.shape()) {
      throw Error(ErrorCode::CorruptFile, path + ": tensor " + np.name + " has shape " +
                                              shape_string(it->second.dims) + ", expected " +
                                              shape_string(np.param->value.shape()));
    }
    auto dst = np.param->value.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = it->second.values[i];
    np.param->grad.fill(0.0);
  }
  model.mark_initialized();
}

ModelSpec spec_from(const std::map<std::string, Record>& records, const std::string& path) {
  auto it = records.find(std::string(kModelRecord));
  if (it == records.end() || it->second.values.size() != 3) {
    throw Error(ErrorCode::CorruptFile, path + ": missing model header");
  }
  const auto& v = it->second.values;
  const int arch = static_cast<int>(v[0]);
  const int preset = static_cast<int>(v[2]);
  if (arch < 0 || arch > 2 || preset < 0 || preset > 1 || v[1] < 1.0f) {
    throw Error(ErrorCode::CorruptFile, path + ": invalid model header");
  }
  ModelSpec spec = build_model(static_cast<Arch>(arch), 64, static_cast<WidthPreset>(preset));
  spec.input_size = static_cast<std::size_t>(v[1]);
  return spec;
}

}  // namespace

void save_weights(const Model& model, const std::filesystem::path& path) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kWeightsVersion));
  const ModelSpec& spec = model.spec();
  const double header[3] = {static_cast<double>(spec.arch), static_cast<double>(spec.input_size),
                            static_cast<double>(spec.preset)};
  put_record(out, kModelRecord, {3}, header);
  for (const auto& [name, param] : model.parameters()) {
    put_record(out, name, param->value.shape(), param->value.values());
  }
  put_u32(out, crc_of(std::string_view(out).substr(5)));
  write_file_atomic(path, out);
}

Model load_weights(const std::filesystem::path& path) {
  auto records = parse_file(path);
  Model model(spec_from(records, path.string()));
  assign(model, records, path.string());
  return model;
}

void load_weights_into(Model& model, const std::filesystem::path& path) {
  auto records = parse_file(path);
  const ModelSpec spec = spec_from(records, path.string());
  if (spec.arch != model.spec().arch || spec.preset != model.spec().preset ||
      spec.input_size != model.spec().input_size) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": weights are for " + std::string(to_string(spec.arch)) +
                                            "/" + std::string(to_string(spec.preset)) + "@" +
                                            std::to_string(spec.input_size));
  }
  assign(model, records, path.string());
}

}  // namespace tender::nn
