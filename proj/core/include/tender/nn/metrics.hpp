#pragma once

#include <cstdint>
#include <span>

namespace tender::nn {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double loss = 0.0;
};

// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

// Zero denominators yield 0 for precision/recall/F1. Throws EmptyTotal when
// every count is zero.
Metrics metrics_from_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);
inline Metrics metrics_from_confusion(const Confusion& c) { return metrics_from_confusion(c.tp, c.fp, c.fn, c.tn); }

// Positive class = 1 (notice).
Confusion count_confusion(std::span<const int> predicted, std::span<const int> labels);

}  // namespace tender::nn
