#include "tender/nn/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tender/fsutil.hpp"
#include "tender/nn/rng.hpp"
#include "tender/nn/weights.hpp"

namespace tender::nn {

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t per = images.size() / std::max<std::size_t>(1, size());
  Shape shape = images.shape();
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(images.data() + indices[i] * per, per, out.data() + i * per);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels[i]);
  return out;
}

image::GrayImage prepare_input(const image::GrayImage& img, std::size_t input_size, std::uint8_t fill) {
  const int s = static_cast<int>(input_size);
  return image::resize_bilinear(image::pad_to_square(img, fill), s, s);
}

Tensor images_to_tensor(std::span<const image::GrayImage> images, std::size_t input_size) {
  Tensor out({images.size(), 1, input_size, input_size});
  const std::size_t per = input_size * input_size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (static_cast<std::size_t>(img.width()) != input_size || static_cast<std::size_t>(img.height()) != input_size) {
      throw Error(ErrorCode::ShapeMismatch, "image " + std::to_string(i) + " is " + std::to_string(img.width()) +
                                                "x" + std::to_string(img.height()) + ", model expects " +
                                                std::to_string(input_size));
    }
    for (std::size_t p = 0; p < per; ++p) out[i * per + p] = img.data()[p] / 255.0;
  }
  return out;
}

Dataset make_dataset(std::span<const image::GrayImage> images, std::vector<int> labels, std::size_t input_size) {
  if (images.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "image and label counts differ");
  return {images_to_tensor(images, input_size), std::move(labels)};
}

Split stratified_split(const Dataset& all, double test_fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if ((all.labels[i] != 0) == (cls == 1)) members.push_back(i);
    }
    rng.shuffle(members);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(members.size())));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {{all.gather(train_idx), all.gather_labels(train_idx)}, {all.gather(test_idx), all.gather_labels(test_idx)}};
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::ConfigError, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::ConfigError, "learning rate must be >= 0");
}

bool decide_positive(const Model& model, const Tensor& logits, std::size_t row) {
  if (model.spec().head == Head::SigmoidBCE) return sigmoid(logits[row]) >= 0.5;
  return logits[2 * row + 1] > logits[2 * row];
}

namespace {

class OptimizerState {
 public:
  OptimizerState(Model& model, const TrainConfig& cfg) : cfg_(cfg) {
    for (auto& np : model.parameters()) {
      if (!np.param->trainable) continue;
      params_.push_back(np.param);
      first_.emplace_back(np.param->value.size(), 0.0);
      second_.emplace_back(cfg.optimizer == Optimizer::Adam ? np.param->value.size() : 0, 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor& w = params_[p]->value;
      const Tensor& g = params_[p]->grad;
      auto& m = first_[p];
      if (cfg_.optimizer == Optimizer::SgdMomentum) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.momentum * m[i] - cfg_.learning_rate * g[i];
          w[i] += m[i];
        }
      } else {
        auto& v = second_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
          w[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_epsilon);
        }
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long long t_ = 0;
};

struct EvalPass {
  double loss = 0.0;
  Confusion confusion;
};

EvalPass evaluate_pass(const Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "evaluation dataset is empty");
  EvalPass r;
  std::vector<int> predicted;
  predicted.reserve(data.size());
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    const Tensor logits = model.infer(data.gather(idx));
    const std::vector<int> labels = data.gather_labels(idx);
    loss_sum += model.loss(logits, labels, nullptr) * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) predicted.push_back(decide_positive(model, logits, i) ? 1 : 0);
  }
  r.loss = loss_sum / static_cast<double>(data.size());
  r.confusion = count_confusion(predicted, data.labels);
  return r;
}

}  // namespace

TrainResult train_model(Model& model, const Dataset& train, const Dataset& test, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() == 0) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
  if (test.size() == 0) throw Error(ErrorCode::EmptyDataset, "test dataset is empty");
  if (train.images.shape() != Shape{train.size(), 1, model.spec().input_size, model.spec().input_size}) {
    throw Error(ErrorCode::ShapeMismatch, "training images " + shape_string(train.images.shape()) +
                                              " do not match model input " + std::to_string(model.spec().input_size));
  }
  if (!model.initialized()) model.initialize(config.seed);
  model.zero_grad();

  Rng rng(config.seed ^ 0x5deece66dULL);
  OptimizerState optimizer(model, config);
  TrainResult result;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor x = train.gather(idx);
      const std::vector<int> labels = train.gather_labels(idx);

      const Tensor logits = model.forward(x);
      Tensor dlogits;
      const double loss = model.loss(logits, labels, &dlogits);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became " + std::to_string(loss) + " at epoch " +
                                                  std::to_string(epoch) + ", batch starting " + std::to_string(start));
      }
      loss_sum += loss * static_cast<double>(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (decide_positive(model, logits, i) == (labels[i] != 0)) ++correct;
      }
      model.zero_grad();
      model.backward(dlogits);
      optimizer.step();
      model.round_parameters_to_float();
    }

    const EvalPass eval = evaluate_pass(model, test, config.batch_size);
    HistoryRow row{epoch, loss_sum / static_cast<double>(train.size()),
                   static_cast<double>(correct) / static_cast<double>(train.size()), eval.loss,
                   metrics_from_confusion(eval.confusion).accuracy};
    result.history.push_back(row);
    if (on_epoch) on_epoch(row);

    if (std::find(config.checkpoint_epochs.begin(), config.checkpoint_epochs.end(), epoch) !=
        config.checkpoint_epochs.end()) {
      Checkpoint cp;
      cp.epoch = epoch;
      cp.test_metrics = metrics_from_confusion(eval.confusion);
      cp.test_metrics.loss = eval.loss;
      if (!config.checkpoint_dir.empty()) {
        cp.weights = config.checkpoint_dir /
                     (std::string(to_string(model.spec().arch)) + "-e" + std::to_string(epoch) + ".tndr");
        save_weights(model, cp.weights);
      }
      result.checkpoints.push_back(std::move(cp));
    }
  }
  return result;
}

Metrics evaluate_model(const Model& model, const Dataset& data, std::size_t batch_size) {
  const EvalPass eval = evaluate_pass(model, data, std::max<std::size_t>(1, batch_size));
  Metrics m = metrics_from_confusion(eval.confusion);
  m.loss = eval.loss;
  return m;
}

std::vector<Prediction> predict_batch(const Model& model, std::span<const image::GrayImage> images) {
  if (!model.initialized()) throw Error(ErrorCode::ModelNotTrained, "model weights are uninitialized");
  std::vector<Prediction> out;
  if (images.empty()) return out;
  const Tensor logits = model.infer(images_to_tensor(images, model.spec().input_size));
  const std::vector<double> scores = model.positive_scores(logits);
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back({decide_positive(model, logits, i), scores[i]});
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows) {
  std::string out = "epoch,train_loss,train_acc,test_loss,test_acc\n";
  for (const HistoryRow& r : rows) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.train_acc) + "," +
           format_double(r.test_loss) + "," + format_double(r.test_acc) + "\n";
  }
  write_file_atomic(path, out);
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<HistoryRow> rows;
  if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,test_loss,test_acc") {
    throw Error(ErrorCode::CorruptFile, path.string() + ": missing history header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRow r;
    std::istringstream fields(line);
    std::string f[5];
    for (auto& s : f) std::getline(fields, s, ',');
    try {
      r.epoch = std::stoi(f[0]);
      r.train_loss = std::stod(f[1]);
      r.train_acc = std::stod(f[2]);
      r.test_loss = std::stod(f[3]);
      r.test_acc = std::stod(f[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::CorruptFile, path.string() + ": bad history row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tender::nn
