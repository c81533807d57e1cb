#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tender/image.hpp"
#include "tender/nn/model.hpp"
#include "tender/ocr.hpp"
#include "tender/pipeline/config.hpp"
#include "tender/pipeline/manifest.hpp"

namespace tender::pipeline {

struct RunStats {
  int documents = 0;
  int pages = 0;
  int failed_pages = 0;
  int crops = 0;
  int positives = 0;
  int records = 0;
};

struct RunOptions {
  std::string run_id;                              // generated when empty
  std::function<void(const std::string&)> log;     // stderr when unset
  RunStats* stats = nullptr;
};

// page-007__x10_y20_w300_h200.png
std::string crop_file_name(int page, const image::BBox& box);

struct PageContext {
  std::string source;
  std::string date;
  int page = 0;
  std::filesystem::path crop_dir;
  std::filesystem::path reject_dir;  // empty: negatives are not kept
};

// segment -> preprocess -> classify -> OCR -> keyword rule for one page.
// Returns the records of crops passing both the classifier and the rule.
std::vector<NoticeRecord> process_page(const image::GrayImage& page, const PageContext& ctx,
                                       const PipelineConfig& config, const nn::Model& model,
                                       const ocr::KeywordSet& keywords, RunStats* stats = nullptr);

// fetch -> rasterize -> process_page for every source, then writes the
// manifest atomically to config.manifest. A page that fails is logged and
// skipped; configuration-level failures (missing engine, weights, keywords)
// propagate.
Manifest run_full(const PipelineConfig& config, const RunOptions& options = {});

// YYYY-MM-DD (UTC).
std::string today_utc();

}  // namespace tender::pipeline
