#include "tender/pipeline/run.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>

#include "tender/error.hpp"
#include "tender/fetch.hpp"
#include "tender/nn/train.hpp"
#include "tender/nn/weights.hpp"
#include "tender/pipeline/png_io.hpp"
#include "tender/segmenter.hpp"

namespace tender::pipeline {

namespace fs = std::filesystem;

std::string crop_file_name(int page, const image::BBox& b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "page-%03d__x%d_y%d_w%d_h%d.png", page, b.x, b.y, b.w, b.h);
  return buf;
}

std::string today_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d", &tm);
  return buf;
}

std::vector<NoticeRecord> process_page(const image::GrayImage& page, const PageContext& ctx,
                                       const PipelineConfig& config, const nn::Model& model,
                                       const ocr::KeywordSet& keywords, RunStats* stats) {
  const auto segments = seg::segment_page(page, config.segmentation);
  std::vector<image::GrayImage> inputs;
  inputs.reserve(segments.size());
  for (const auto& s : segments) inputs.push_back(nn::prepare_input(s.crop, model.spec().input_size));
  const auto predictions = nn::predict_batch(model, inputs);
  if (stats) stats->crops += static_cast<int>(segments.size());

  std::vector<NoticeRecord> records;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const std::string name = crop_file_name(ctx.page, s.bbox);
    if (!predictions[i].positive) {
      if (!ctx.reject_dir.empty()) write_png(ctx.reject_dir / name, s.crop);
      continue;
    }
    if (stats) ++stats->positives;
    const fs::path crop_path = ctx.crop_dir / name;
    write_png(crop_path, s.crop);
    const auto tokens = ocr::run_ocr(crop_path, config.ocr_command);
    const auto decision = ocr::is_tender(tokens, keywords, config.min_common, config.min_conf);
    if (!decision.is_tender) continue;
    NoticeRecord r;
    r.source = ctx.source;
    r.date = ctx.date;
    r.page = ctx.page;
    r.bbox = s.bbox;
    r.crop_path = crop_path.string();
    r.score = predictions[i].score;
    r.matched_keywords.assign(decision.matched.begin(), decision.matched.end());
    r.common_count = decision.common_count;
    r.decided = true;
    r.extracted_at = utc_timestamp();
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

bool is_setup_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::EngineNotFound:
    case ErrorCode::ModelNotTrained:
    case ErrorCode::ConfigError:
    case ErrorCode::EmptyKeywordSet:
      return true;
    default:
      return false;
  }
}

}  // namespace

Manifest run_full(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  auto log = options.log ? options.log : [](const std::string& m) { std::cerr << m << "\n"; };
  RunStats local;
  RunStats& stats = options.stats ? *options.stats : local;
  stats = {};

  Manifest manifest;
  manifest.run_id = options.run_id.empty() ? new_run_id() : options.run_id;
  manifest.created_at = utc_timestamp();
  manifest.config_hash = config_hash(config);

  if (!config.sources.empty()) {
    const ocr::KeywordSet keywords = ocr::load_keywords(config.keywords);
    if (!fs::exists(config.model.weights)) {
      throw Error(ErrorCode::ModelNotTrained, "weights file " + config.model.weights.string() + " does not exist");
    }
    const nn::Model model = nn::load_weights(config.model.weights);
    if (model.spec().arch != config.model.arch || model.spec().input_size != config.model.input_size) {
      throw Error(ErrorCode::ConfigError, config.model.weights.string() + " holds " +
                                              std::string(nn::to_string(model.spec().arch)) + "@" +
                                              std::to_string(model.spec().input_size) + ", config expects " +
                                              std::string(nn::to_string(config.model.arch)) + "@" +
                                              std::to_string(config.model.input_size));
    }
    const std::string date = config.date.empty() ? today_utc() : config.date;

    for (const auto& source : config.sources) {
      const std::string html = fetch::fetch_index(source);
      const auto links = fetch::extract_pdf_links(html, source.link_class, source.index_url);
      log(source.name + ": " + std::to_string(links.size()) + " document link(s)");
      const fs::path dated = fs::path(source.name) / date;
      int page_index = 0;
      for (std::size_t d = 0; d < links.size(); ++d) {
        const auto record = fetch::download_file(links[d], source, dated);
        ++stats.documents;
        const fs::path page_dir = config.work_dir / "pages" / dated / std::to_string(d);
        const auto pages = fetch::rasterize_pdf(record.local_path, config.dpi, page_dir, config.rasterizer_command);
        for (const auto& page_path : pages) {
          PageContext ctx{source.name, date, page_index++, config.work_dir / "crops" / dated,
                          config.debug_rejects ? config.work_dir / "rejects" / dated : fs::path{}};
          ++stats.pages;
          try {
            const auto page = read_png_gray(page_path);
            auto recs = process_page(page, ctx, config, model, keywords, &stats);
            for (auto& r : recs) manifest.records.push_back(std::move(r));
          } catch (const Error& e) {
            if (is_setup_failure(e.code())) throw;
            ++stats.failed_pages;
            log(source.name + " page " + std::to_string(ctx.page) + " skipped: " + e.what());
          } catch (const std::exception& e) {
            ++stats.failed_pages;
            log(source.name + " page " + std::to_string(ctx.page) + " skipped: " + e.what());
          }
        }
      }
    }
  }

  sort_records(manifest.records);
  stats.records = static_cast<int>(manifest.records.size());
  export_manifest(manifest, config.manifest);
  log("manifest: " + std::to_string(stats.records) + " record(s) from " + std::to_string(stats.pages) +
      " page(s), " + std::to_string(stats.failed_pages) + " skipped -> " + config.manifest.string());
  return manifest;
}

}  // namespace tender::pipeline
