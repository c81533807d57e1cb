#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tender/nn/ops.hpp"
#include "tender/nn/tensor.hpp"

namespace tender::nn {

enum class Init { Zeros, Ones, HeUniform };

struct Parameter {
  Tensor value;
  Tensor grad;
  bool trainable = true;  // false for batchnorm running statistics
  Init init = Init::Zeros;
  std::size_t fan_in = 0;
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

// A differentiable stage. `forward` runs the training phase and caches what
// `backward` needs; `infer` is the pure inference phase and never mutates.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;
  // Accumulates into parameter gradients and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect(const std::string& prefix, std::vector<NamedParameter>& out);
  // Hash of the piecewise-linear branch pattern (ReLU masks, pool argmax) of
  // the last forward; changes when a perturbation crosses a kink.
  virtual std::uint64_t activation_signature() const { return 0; }
};

using LayerPtr = std::unique_ptr<Layer>;

class Conv2D final : public Layer {
 public:
  Conv2D(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t stride, Padding padding);

  std::string_view kind() const override { return "conv"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;

  Parameter kernel;
  Parameter bias;

 private:
  std::size_t stride_;
  Padding padding_;
  Tensor input_;
};

class SeparableConv2D final : public Layer {
 public:
  SeparableConv2D(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t stride,
                  Padding padding);

  std::string_view kind() const override { return "sepconv"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;

  Parameter depthwise;
  Parameter pointwise;
  Parameter bias;

 private:
  std::size_t stride_;
  Padding padding_;
  Tensor input_;
  Tensor mid_;
};

class BatchNorm final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm(std::size_t channels);

  std::string_view kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;

  Parameter gamma;
  Parameter beta;
  Parameter running_mean;
  Parameter running_var;

 private:
  BatchNormCache cache_;
};

class ReLU final : public Layer {
 public:
  std::string_view kind() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override { return relu_forward(x); }
  Tensor backward(const Tensor& dy) override { return relu_backward(input_, dy); }
  std::uint64_t activation_signature() const override;

 private:
  Tensor input_;
};

class MaxPool2D final : public Layer {
 public:
  MaxPool2D(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {}

  std::string_view kind() const override { return "maxpool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::uint64_t activation_signature() const override;

 private:
  std::size_t window_;
  std::size_t stride_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

class GlobalAvgPool final : public Layer {
 public:
  std::string_view kind() const override { return "gap"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override { return global_avg_pool_forward(x); }
  Tensor backward(const Tensor& dy) override { return global_avg_pool_backward(input_shape_, dy); }

 private:
  Shape input_shape_;
};

class Flatten final : public Layer {
 public:
  std::string_view kind() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override { return dy.reshaped(input_shape_); }

 private:
  Shape input_shape_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t inputs, std::size_t units);

  std::string_view kind() const override { return "dense"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;

  Parameter weight;
  Parameter bias;

 private:
  Tensor input_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;

  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  std::string_view kind() const override { return "sequential"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;
  std::uint64_t activation_signature() const override;

 private:
  std::vector<LayerPtr> layers_;
};

// --- composite units --------------------------------------------------------

struct ResidualUnitSpec {
  std::size_t filters = 0;
  std::size_t stride = 1;
  std::string activation = "relu";
};

struct InceptionSpec {
  std::size_t b1 = 0;
  std::size_t b3_reduce = 0;
  std::size_t b3 = 0;
  std::size_t b5_reduce = 0;
  std::size_t b5 = 0;
  std::size_t pool_proj = 0;

  std::size_t output_channels() const { return b1 + b3 + b5 + pool_proj; }
};

struct XceptionUnitSpec {
  std::size_t filters = 0;
  bool is_entry_exit = false;
  bool is_first = false;
};

// main: conv3x3/s -> BN -> ReLU -> conv3x3 -> BN
// skip: identity, or conv1x1/s -> BN when the shape changes
// out:  ReLU(main + skip)
class ResidualUnit final : public Layer {
 public:
  ResidualUnit(std::size_t in_channels, const ResidualUnitSpec& spec);

  std::string_view kind() const override { return "residual"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;
  std::uint64_t activation_signature() const override;

  Sequential& main_path() { return main_; }
  Sequential& skip_path() { return skip_; }

 private:
  std::size_t in_channels_;
  ResidualUnitSpec spec_;
  Sequential main_;
  Sequential skip_;  // empty = identity
  ReLU merge_;
};

// Four SAME-padded branches concatenated along channels:
// 1x1 | 1x1 -> 3x3 | 1x1 -> 5x5 | maxpool3x3/1 -> 1x1, each conv followed by BN -> ReLU.
class InceptionModule final : public Layer {
 public:
  InceptionModule(std::size_t in_channels, const InceptionSpec& spec);

  std::string_view kind() const override { return "inception"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;
  std::uint64_t activation_signature() const override;

  Sequential& branch(std::size_t i) { return branches_[i]; }

 private:
  std::size_t in_channels_;
  InceptionSpec spec_;
  Sequential branches_[4];
};

// Base: [ReLU -> sepconv3x3 -> BN] x 2 with an identity skip.
// Entry/exit (is_entry_exit): append maxpool3x3/2, skip becomes conv1x1/2 -> BN.
// is_first additionally drops the first [ReLU -> sepconv -> BN] block.
// out: main + skip
class XceptionUnit final : public Layer {
 public:
  XceptionUnit(std::size_t in_channels, const XceptionUnitSpec& spec);

  std::string_view kind() const override { return "xception"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) override;
  std::uint64_t activation_signature() const override;

  Sequential& main_path() { return main_; }
  Sequential& skip_path() { return skip_; }

 private:
  std::size_t in_channels_;
  XceptionUnitSpec spec_;
  Sequential main_;
  Sequential skip_;  // empty = identity
};

}  // namespace tender::nn
