#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tender/nn/metrics.hpp"
#include "tender/nn/model.hpp"
#include "tender/nn/train.hpp"

namespace tender::pipeline {

struct RunResult {
  nn::Arch arch = nn::Arch::Xception;
  int epochs = 0;
  nn::Metrics metrics;
  std::vector<nn::HistoryRow> history;  // optional; written as a curve CSV when present
};

struct ModelReport {
  std::vector<RunResult> rows;  // ordered by (arch, epochs)
  RunResult selected;
  std::string table;
};

using Slot = std::pair<nn::Arch, int>;

// Every (arch, epochs) slot for the three architectures at 50 and 100 epochs.
std::vector<Slot> standard_slots();

// Picks the highest F1; ties go to higher recall, then higher accuracy, then
// the earlier (arch, epochs). Throws MissingRun when `runs` is empty or any
// slot in `expected` has no run.
ModelReport compare_models_report(std::span<const RunResult> runs, std::span<const Slot> expected = {});

// report.txt (the table and selection), selection.json, and
// curve-<arch>-e<epochs>.csv per run with a history.
void write_report(const ModelReport& report, const std::filesystem::path& dir);

// Run metadata as written by `tender train`: metrics.json next to history.csv.
void write_run(const RunResult& run, const std::filesystem::path& dir);
// Reads every <dir>/*/metrics.json.
std::vector<RunResult> read_runs(const std::filesystem::path& dir);

}  // namespace tender::pipeline
