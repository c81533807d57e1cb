// tender: fetch -> rasterize -> segment -> classify -> filter, plus training,
// reporting and the read-only listing server.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "tender/error.hpp"
#include "tender/fetch.hpp"
#include "tender/fsutil.hpp"
#include "tender/nn/train.hpp"
#include "tender/nn/weights.hpp"
#include "tender/ocr.hpp"
#include "tender/pipeline/config.hpp"
#include "tender/pipeline/png_io.hpp"
#include "tender/pipeline/report.hpp"
#include "tender/pipeline/run.hpp"
#include "tender/pipeline/server.hpp"
#include "tender/pipeline/synthetic.hpp"
#include "tender/pipeline/training.hpp"
#include "tender/segmenter.hpp"

namespace fs = std::filesystem;
using namespace tender;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

struct Overrides {
  std::string config = "tender.json";
  std::optional<int> dpi;
  std::optional<std::string> arch;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> min_common;
  std::optional<int> port;
};

pipeline::PipelineConfig load(const Overrides& o) {
  pipeline::PipelineConfig c;
  if (fs::exists(o.config)) {
    c = pipeline::load_config(o.config);
  } else if (o.config != "tender.json") {
    throw Error(ErrorCode::ConfigError, "config file " + o.config + " not found");
  }
  if (o.dpi) c.dpi = *o.dpi;
  if (o.arch) {
    const auto a = nn::parse_arch(*o.arch);
    if (!a) throw Error(ErrorCode::ConfigError, "--arch must be resnet, googlenet or xception");
    c.model.arch = *a;
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.seed) c.train.seed = *o.seed;
  if (o.min_common) c.min_common = *o.min_common;
  if (o.port) c.port = *o.port;
  c.validate();
  return c;
}

void print_record(const fetch::DownloadRecord& r) {
  std::cout << r.local_path.string() << "  " << r.byte_size << " bytes  sha256 " << r.sha256 << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tender notice extraction pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("-c,--config", o.config, "JSON config file (default tender.json if present)");

  auto add_overrides = [&o](CLI::App* sub, bool dpi, bool arch, bool epochs, bool seed, bool min_common, bool port) {
    if (dpi) sub->add_option("--dpi", o.dpi, "rasterization DPI");
    if (arch) sub->add_option("--arch", o.arch, "resnet | googlenet | xception");
    if (epochs) sub->add_option("--epochs", o.epochs, "training epochs");
    if (seed) sub->add_option("--seed", o.seed, "random seed");
    if (min_common) sub->add_option("--min-common", o.min_common, "keywords required for a tender decision");
    if (port) sub->add_option("--port", o.port, "listening port");
  };

  auto* fetch_cmd = app.add_subcommand("fetch", "download the linked PDFs of every source");
  add_overrides(fetch_cmd, false, false, false, false, false, false);

  std::string input;
  std::string out_dir;
  auto* raster_cmd = app.add_subcommand("rasterize", "render a PDF into page-NNN.png images");
  raster_cmd->add_option("--input", input, "PDF file")->required();
  raster_cmd->add_option("--out", out_dir, "output directory")->required();
  add_overrides(raster_cmd, true, false, false, false, false, false);

  auto* segment_cmd = app.add_subcommand("segment", "crop rectangular regions from a page image");
  segment_cmd->add_option("--input", input, "page PNG")->required();
  segment_cmd->add_option("--out", out_dir, "directory for crops")->required();

  bool all_archs = false;
  auto* train_cmd = app.add_subcommand("train", "train a classifier on the synthetic two-class set");
  train_cmd->add_flag("--all", all_archs, "train all three architectures");
  add_overrides(train_cmd, false, true, true, true, false, false);

  std::vector<std::string> images;
  auto* classify_cmd = app.add_subcommand("classify", "score crops with the trained model");
  classify_cmd->add_option("inputs", images, "crop PNGs")->required();

  std::string tsv;
  auto* filter_cmd = app.add_subcommand("filter", "apply the keyword rule to an image or a word table");
  filter_cmd->add_option("--input", input, "image to OCR");
  filter_cmd->add_option("--tsv", tsv, "existing OCR word table");
  add_overrides(filter_cmd, false, false, false, false, true, false);

  auto* run_cmd = app.add_subcommand("run", "full pipeline; writes the manifest");
  add_overrides(run_cmd, true, true, false, false, true, false);

  std::string runs_dir;
  bool require_all = false;
  auto* report_cmd = app.add_subcommand("report", "compare trained runs and select a model");
  report_cmd->add_option("--runs", runs_dir, "directory of runs (default train.out_dir)");
  report_cmd->add_option("--out", out_dir, "report directory (default: the runs directory)");
  report_cmd->add_flag("--require-all", require_all, "fail unless all three archs have 50 and 100 epoch runs");

  auto* serve_cmd = app.add_subcommand("serve", "serve the manifest read-only over HTTP");
  add_overrides(serve_cmd, false, false, false, false, false, true);

  int pages = 1;
  int frames = 3;
  std::optional<int> tender_frames;
  std::uint64_t synth_seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic page corpus with ground truth");
  synth_cmd->add_option("--pages", pages, "page count");
  synth_cmd->add_option("--frames", frames, "frames per page");
  synth_cmd->add_option("--tender", tender_frames, "tender frames in total");
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      pipeline::CorpusSpec spec;
      spec.frames_per_page = frames;
      spec.tender_frames = tender_frames;
      const auto corpus = pipeline::generate_synthetic_corpus(pages, spec, synth_seed);
      pipeline::write_corpus(corpus, out_dir);
      std::cout << corpus.pages.size() << " page(s), " << corpus.frames.size() << " frame(s) -> " << out_dir << "\n";
      return 0;
    }

    const auto config = load(o);

    if (fetch_cmd->parsed()) {
      for (const auto& s : config.sources) {
        const auto links = fetch::extract_pdf_links(fetch::fetch_index(s), s.link_class, s.index_url);
        const std::string date = config.date.empty() ? pipeline::today_utc() : config.date;
        for (const auto& url : links) print_record(fetch::download_file(url, s, fs::path(s.name) / date));
      }
    } else if (raster_cmd->parsed()) {
      for (const auto& p : fetch::rasterize_pdf(input, config.dpi, out_dir, config.rasterizer_command)) {
        std::cout << p.string() << "\n";
      }
    } else if (segment_cmd->parsed()) {
      const auto page = pipeline::read_png_gray(input);
      fs::create_directories(out_dir);
      for (const auto& s : seg::segment_page(page, config.segmentation)) {
        const auto path = fs::path(out_dir) / pipeline::crop_file_name(0, s.bbox);
        pipeline::write_png(path, s.crop);
        std::cout << s.bbox.x << " " << s.bbox.y << " " << s.bbox.w << " " << s.bbox.h << "  " << path.string()
                  << "\n";
      }
    } else if (train_cmd->parsed()) {
      std::vector<nn::Arch> archs = {config.model.arch};
      if (all_archs) archs = {nn::Arch::ResNet, nn::Arch::GoogLeNet, nn::Arch::Xception};
      for (auto arch : archs) {
        std::cout << "training " << nn::to_string(arch) << "\n";
        auto outcome = pipeline::train_on_synthetic(config, arch, [](const nn::HistoryRow& h) {
          std::printf("  epoch %3d  loss %.4f  acc %.4f  test_loss %.4f  test_acc %.4f\n", h.epoch, h.train_loss,
                      h.train_acc, h.test_loss, h.test_acc);
        });
        if (arch == config.model.arch) {
          nn::save_weights(outcome.model, config.model.weights);
          std::cout << "weights -> " << config.model.weights.string() << "\n";
        }
      }
    } else if (classify_cmd->parsed()) {
      const auto model = nn::load_weights(config.model.weights);
      std::vector<image::GrayImage> crops;
      for (const auto& p : images) crops.push_back(nn::prepare_input(pipeline::read_png_gray(p), model.spec().input_size));
      const auto preds = nn::predict_batch(model, crops);
      for (std::size_t i = 0; i < images.size(); ++i) {
        std::printf("%s\t%s\t%.6f\n", images[i].c_str(), preds[i].positive ? "notice" : "other", preds[i].score);
      }
    } else if (filter_cmd->parsed()) {
      if (input.empty() == tsv.empty()) throw Error(ErrorCode::ConfigError, "filter needs exactly one of --input or --tsv");
      const auto tokens = tsv.empty() ? ocr::run_ocr(input, config.ocr_command) : ocr::parse_ocr_tsv(read_file(tsv));
      const auto d = ocr::is_tender(tokens, ocr::load_keywords(config.keywords), config.min_common, config.min_conf);
      std::cout << (d.is_tender ? "tender" : "not tender") << "  common=" << d.common_count
                << "  min_common=" << d.min_common << "  matched:";
      for (const auto& m : d.matched) std::cout << " " << m;
      std::cout << "\n";
    } else if (run_cmd->parsed()) {
      pipeline::RunStats stats;
      pipeline::RunOptions opts;
      opts.stats = &stats;
      const auto manifest = pipeline::run_full(config, opts);
      std::cout << manifest.records.size() << " notice(s), run " << manifest.run_id << "\n";
    } else if (report_cmd->parsed()) {
      const fs::path rd = runs_dir.empty() ? config.train_data.out_dir : fs::path(runs_dir);
      const auto runs = pipeline::read_runs(rd);
      const auto slots = pipeline::standard_slots();
      const auto report = pipeline::compare_models_report(runs, require_all ? std::span<const pipeline::Slot>(slots)
                                                                           : std::span<const pipeline::Slot>{});
      pipeline::write_report(report, out_dir.empty() ? rd : fs::path(out_dir));
      std::cout << report.table;
    } else if (serve_cmd->parsed()) {
      const auto manifest = pipeline::load_manifest(config.manifest);
      std::cout << "serving " << config.manifest.string() << " on port " << config.port << "\n" << std::flush;
      pipeline::serve_listing(manifest, config.port);
    }
  } catch (const Error& e) {
    std::cerr << "tender: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "tender: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
