#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tender/image.hpp"

namespace tender::pipeline {

struct NoticeRecord {
  std::string source;
  std::string date;
  int page = 0;
  image::BBox bbox;
  std::string crop_path;
  double score = 0.0;
  std::vector<std::string> matched_keywords;
  int common_count = 0;
  bool decided = true;
  std::string extracted_at;

  bool operator==(const NoticeRecord&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string run_id;
  std::string created_at;
  std::string config_hash;
  std::vector<NoticeRecord> records;

  bool operator==(const Manifest&) const = default;
};

// (source, date, page, bbox.y, bbox.x, bbox.h, bbox.w)
void sort_records(std::vector<NoticeRecord>& records);

std::string manifest_to_json(const Manifest& manifest);
// Throws CorruptFile.
Manifest parse_manifest(std::string_view json);

// Atomic write. Throws IoError.
void export_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

// Copy with run id and all timestamps cleared, for rerun comparisons.
Manifest without_volatile_fields(Manifest manifest);

std::string utc_timestamp();
std::string new_run_id();

}  // namespace tender::pipeline
