#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tender/nn/layers.hpp"

namespace tender::nn {

enum class Arch { ResNet, GoogLeNet, Xception };
enum class WidthPreset { Paper, Tiny };
enum class Head { SigmoidBCE, SoftmaxCE };

std::string_view to_string(Arch arch);
std::string_view to_string(WidthPreset preset);
std::optional<Arch> parse_arch(std::string_view name);
std::optional<WidthPreset> parse_preset(std::string_view name);

struct ConvSpec {
  std::size_t filters;
  std::size_t kernel;
  std::size_t stride;
};
struct SepConvSpec {
  std::size_t filters;
  std::size_t kernel;
  std::size_t stride;
};
struct BatchNormSpec {};
struct ReluSpec {};
struct MaxPoolSpec {
  std::size_t window;
  std::size_t stride;
};
struct GlobalAvgPoolSpec {};
struct FlattenSpec {};
struct DenseSpec {
  std::size_t units;
};

using LayerSpec = std::variant<ConvSpec, SepConvSpec, BatchNormSpec, ReluSpec, MaxPoolSpec, GlobalAvgPoolSpec,
                               FlattenSpec, DenseSpec, ResidualUnitSpec, InceptionSpec, XceptionUnitSpec>;

std::string describe(const LayerSpec& layer);

struct ModelSpec {
  Arch arch = Arch::Xception;
  std::size_t input_size = 64;  // square, single channel
  WidthPreset preset = WidthPreset::Tiny;
  std::vector<LayerSpec> layers;  // all convolutions use SAME padding
  Head head = Head::SoftmaxCE;

  std::size_t output_units() const { return head == Head::SigmoidBCE ? 1 : 2; }
};

// Input sizes 224, 112 and 64 are supported; anything else throws
// UnsupportedInputSize. `Tiny` divides every filter count by 8 (minimum 4).
ModelSpec build_model(Arch arch, std::size_t input_size, WidthPreset preset);

// Per-layer output shapes for a batch of one; throws ShapeMismatch when the
// chain is inconsistent.
std::vector<Shape> shape_chain(const ModelSpec& spec);

class Model {
 public:
  explicit Model(ModelSpec spec);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  Shape input_shape(std::size_t batch) const { return {batch, 1, spec_.input_size, spec_.input_size}; }

  // Logits: (N,1) for sigmoid heads, (N,2) for softmax heads.
  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dlogits) { return network_.backward(dlogits); }

  double loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits) const;
  // Probability of the positive (notice) class per sample.
  std::vector<double> positive_scores(const Tensor& logits) const;

  std::vector<NamedParameter> parameters();
  std::vector<std::pair<std::string, const Parameter*>> parameters() const;
  std::size_t parameter_count() const;  // trainable scalars

  // He-uniform kernels, zero biases, unit gamma; values are kept at float32
  // precision so the weight file round-trips exactly.
  void initialize(std::uint64_t seed);
  bool initialized() const { return initialized_; }
  void mark_initialized() { initialized_ = true; }

  void zero_grad();
  void round_parameters_to_float();

  Sequential& network() { return network_; }
  const Sequential& network() const { return network_; }

 private:
  ModelSpec spec_;
  Sequential network_;
  bool initialized_ = false;
};

}  // namespace tender::nn
