#include "tender/nn/metrics.hpp"

#include "tender/error.hpp"

namespace tender::nn {

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

Metrics metrics_from_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  const std::uint64_t total = tp + fp + fn + tn;
  if (total == 0) throw Error(ErrorCode::EmptyTotal, "confusion counts are all zero");
  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

Confusion count_confusion(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and label counts differ");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p && !y) ++c.fp;
    else if (!p && y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace tender::nn
