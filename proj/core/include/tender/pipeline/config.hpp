#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tender/fetch.hpp"
#include "tender/nn/model.hpp"
#include "tender/nn/train.hpp"
#include "tender/segmenter.hpp"

namespace tender::pipeline {

struct ModelConfig {
  nn::Arch arch = nn::Arch::Xception;
  std::size_t input_size = 64;
  nn::WidthPreset preset = nn::WidthPreset::Tiny;
  std::filesystem::path weights = "model/xception.tndr";
};

// Synthetic training-set settings used by `tender train`.
struct TrainDataConfig {
  int samples = 400;
  double test_fraction = 0.2;
  std::filesystem::path out_dir = "runs";
};

struct PipelineConfig {
  std::vector<fetch::SourceConfig> sources;
  int dpi = fetch::kDefaultDpi;
  std::string rasterizer_command = "pdftoppm -r {dpi} -png {input} {outdir}/page";
  seg::SegmentationParams segmentation;
  ModelConfig model;
  nn::TrainConfig train;
  TrainDataConfig train_data;
  std::string ocr_command = "tesseract {input} stdout tsv";
  double min_conf = 40.0;
  std::filesystem::path keywords = "keywords.txt";
  int min_common = 3;
  std::filesystem::path manifest = "out/manifest.json";
  std::filesystem::path work_dir = "work";
  std::string date;  // publication date label; empty means today (UTC)
  int port = 8080;
  bool debug_rejects = false;

  // Throws ConfigError.
  void validate() const;
};

// A JSON object of dotted keys ("segmentation.min_w": 30) plus a "sources"
// array. Unknown keys are errors. Relative paths resolve against `base_dir`.
// Throws ConfigError.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical serialization (the same dotted keys); its SHA-256 is the
// manifest's config hash.
std::string config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

}  // namespace tender::pipeline
