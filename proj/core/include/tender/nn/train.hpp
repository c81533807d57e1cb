#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "tender/image.hpp"
#include "tender/nn/metrics.hpp"
#include "tender/nn/model.hpp"

namespace tender::nn {

// Images as (N, 1, S, S) scaled to [0, 1]; labels 1 = notice, 0 = other.
struct Dataset {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

// Pads to a square with `fill` then resamples to `input_size`.
image::GrayImage prepare_input(const image::GrayImage& img, std::size_t input_size, std::uint8_t fill = 0);

// Images must already be input_size x input_size.
Tensor images_to_tensor(std::span<const image::GrayImage> images, std::size_t input_size);
Dataset make_dataset(std::span<const image::GrayImage> images, std::vector<int> labels, std::size_t input_size);

struct Split {
  Dataset train;
  Dataset test;
};

// Per-class seeded shuffle; round(test_fraction * class size) of each class
// goes to the test split.
Split stratified_split(const Dataset& all, double test_fraction, std::uint64_t seed);

enum class Optimizer { Adam, SgdMomentum };

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 42;
  std::vector<int> checkpoint_epochs;
  std::filesystem::path checkpoint_dir;  // empty: checkpoints are evaluated but not written
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;

  void validate() const;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;

  bool operator==(const HistoryRow&) const = default;
};

struct Checkpoint {
  int epoch = 0;
  std::filesystem::path weights;
  Metrics test_metrics;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  std::vector<Checkpoint> checkpoints;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

// Mini-batch training, shuffled per epoch by a seeded generator. Initializes
// the model from `config.seed` when it has no weights yet. Deterministic for
// a fixed config: identical inputs give a bitwise-identical history.
TrainResult train_model(Model& model, const Dataset& train, const Dataset& test, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

// sigmoid head: score >= 0.5; softmax head: argmax.
bool decide_positive(const Model& model, const Tensor& logits, std::size_t row);

Metrics evaluate_model(const Model& model, const Dataset& data, std::size_t batch_size = 32);

struct Prediction {
  bool positive = false;
  double score = 0.0;
};

// Inference phase only; safe to call concurrently on a shared model.
std::vector<Prediction> predict_batch(const Model& model, std::span<const image::GrayImage> images);

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

}  // namespace tender::nn
