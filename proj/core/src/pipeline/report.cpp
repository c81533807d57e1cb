#include "tender/pipeline/report.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <tuple>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"

namespace tender::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Slot> standard_slots() {
  std::vector<Slot> slots;
  for (auto a : {nn::Arch::ResNet, nn::Arch::GoogLeNet, nn::Arch::Xception}) {
    for (int e : {50, 100}) slots.emplace_back(a, e);
  }
  return slots;
}

namespace {

// True when a ranks above b.
bool better(const RunResult& a, const RunResult& b) {
  if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
  if (a.metrics.recall != b.metrics.recall) return a.metrics.recall > b.metrics.recall;
  if (a.metrics.accuracy != b.metrics.accuracy) return a.metrics.accuracy > b.metrics.accuracy;
  return std::make_tuple(static_cast<int>(a.arch), a.epochs) < std::make_tuple(static_cast<int>(b.arch), b.epochs);
}

std::string model_name(nn::Arch a) {
  switch (a) {
    case nn::Arch::ResNet: return "ResNet";
    case nn::Arch::GoogLeNet: return "GoogLeNet";
    case nn::Arch::Xception: return "Xception";
  }
  return "?";
}

}  // namespace

ModelReport compare_models_report(std::span<const RunResult> runs, std::span<const Slot> expected) {
  if (runs.empty()) throw Error(ErrorCode::MissingRun, "no training runs to compare");
  for (const auto& [arch, epochs] : expected) {
    const bool found = std::any_of(runs.begin(), runs.end(),
                                   [&](const RunResult& r) { return r.arch == arch && r.epochs == epochs; });
    if (!found) {
      throw Error(ErrorCode::MissingRun, "no run for " + std::string(nn::to_string(arch)) + " @ " +
                                             std::to_string(epochs) + " epochs");
    }
  }
  ModelReport report;
  report.rows.assign(runs.begin(), runs.end());
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const RunResult& a, const RunResult& b) {
    return std::make_tuple(static_cast<int>(a.arch), a.epochs) < std::make_tuple(static_cast<int>(b.arch), b.epochs);
  });
  report.selected = *std::min_element(report.rows.begin(), report.rows.end(), better);

  std::string t = "model      epochs  accuracy  precision  recall  f1\n";
  char line[160];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-10s %6d  %8.4f  %9.4f  %6.4f  %6.4f\n", model_name(r.arch).c_str(), r.epochs,
                  r.metrics.accuracy, r.metrics.precision, r.metrics.recall, r.metrics.f1);
    t += line;
  }
  t += "selected: " + model_name(report.selected.arch) + " @ " + std::to_string(report.selected.epochs) + " epochs\n";
  report.table = std::move(t);
  return report;
}

void write_report(const ModelReport& report, const fs::path& dir) {
  write_file_atomic(dir / "report.txt", report.table);
  const auto& s = report.selected;
  json sel = {{"arch", std::string(nn::to_string(s.arch))},
              {"epochs", s.epochs},
              {"accuracy", s.metrics.accuracy},
              {"precision", s.metrics.precision},
              {"recall", s.metrics.recall},
              {"f1", s.metrics.f1}};
  write_file_atomic(dir / "selection.json", sel.dump(2) + "\n");
  for (const auto& r : report.rows) {
    if (r.history.empty()) continue;
    nn::write_history_csv(dir / ("curve-" + std::string(nn::to_string(r.arch)) + "-e" + std::to_string(r.epochs) + ".csv"),
                          r.history);
  }
}

void write_run(const RunResult& run, const fs::path& dir) {
  const auto& m = run.metrics;
  json j = {{"arch", std::string(nn::to_string(run.arch))},
            {"epochs", run.epochs},
            {"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"loss", m.loss}};
  write_file_atomic(dir / "metrics.json", j.dump(2) + "\n");
  if (!run.history.empty()) nn::write_history_csv(dir / "history.csv", run.history);
}

std::vector<RunResult> read_runs(const fs::path& dir) {
  std::vector<RunResult> runs;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return runs;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "metrics.json")) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& d : subdirs) {
    try {
      const json j = json::parse(read_file(d / "metrics.json"));
      RunResult r;
      const auto arch = nn::parse_arch(j.at("arch").get<std::string>());
      if (!arch) throw Error(ErrorCode::CorruptFile, d.string() + ": unknown arch");
      r.arch = *arch;
      r.epochs = j.at("epochs").get<int>();
      r.metrics = {j.at("accuracy").get<double>(), j.at("precision").get<double>(), j.at("recall").get<double>(),
                   j.at("f1").get<double>(), j.value("loss", 0.0)};
      if (fs::exists(d / "history.csv")) {
        r.history = nn::read_history_csv(d / "history.csv");
        // The curve for a checkpoint stops at its epoch.
        std::erase_if(r.history, [&](const nn::HistoryRow& h) { return h.epoch > r.epochs; });
      }
      runs.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, (d / "metrics.json").string() + ": " + e.what());
    }
  }
  return runs;
}

}  // namespace tender::pipeline
