#include "tender/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tender/nn/rng.hpp"

namespace tender::nn {

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::ResNet: return "resnet";
    case Arch::GoogLeNet: return "googlenet";
    case Arch::Xception: return "xception";
  }
  return "unknown";
}

std::string_view to_string(WidthPreset preset) { return preset == WidthPreset::Paper ? "paper" : "tiny"; }

std::optional<Arch> parse_arch(std::string_view name) {
  if (name == "resnet") return Arch::ResNet;
  if (name == "googlenet") return Arch::GoogLeNet;
  if (name == "xception") return Arch::Xception;
  return std::nullopt;
}

std::optional<WidthPreset> parse_preset(std::string_view name) {
  if (name == "paper") return WidthPreset::Paper;
  if (name == "tiny") return WidthPreset::Tiny;
  return std::nullopt;
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string describe(const LayerSpec& layer) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const ConvSpec& s) { os << "conv" << s.kernel << "x" << s.kernel << "/" << s.stride << "(" << s.filters << ")"; },
                 [&](const SepConvSpec& s) {
                   os << "sepconv" << s.kernel << "x" << s.kernel << "/" << s.stride << "(" << s.filters << ")";
                 },
                 [&](const BatchNormSpec&) { os << "batchnorm"; },
                 [&](const ReluSpec&) { os << "relu"; },
                 [&](const MaxPoolSpec& s) { os << "maxpool" << s.window << "x" << s.window << "/" << s.stride; },
                 [&](const GlobalAvgPoolSpec&) { os << "gap"; },
                 [&](const FlattenSpec&) { os << "flatten"; },
                 [&](const DenseSpec& s) { os << "dense(" << s.units << ")"; },
                 [&](const ResidualUnitSpec& s) { os << "residual(" << s.filters << ", stride " << s.stride << ")"; },
                 [&](const InceptionSpec& s) {
                   os << "inception(" << s.b1 << "," << s.b3_reduce << "," << s.b3 << "," << s.b5_reduce << ","
                      << s.b5 << "," << s.pool_proj << ")";
                 },
                 [&](const XceptionUnitSpec& s) {
                   os << "xception_unit(" << s.filters << (s.is_entry_exit ? ", entry/exit" : "")
                      << (s.is_first ? ", first" : "") << ")";
                 },
             },
             layer);
  return os.str();
}

ModelSpec build_model(Arch arch, std::size_t input_size, WidthPreset preset) {
  if (input_size != 224 && input_size != 112 && input_size != 64) {
    throw Error(ErrorCode::UnsupportedInputSize,
                "input size " + std::to_string(input_size) + " (supported: 224, 112, 64)");
  }
  auto f = [preset](std::size_t filters) {
    return preset == WidthPreset::Paper ? filters : std::max<std::size_t>(4, filters / 8);
  };
  auto inception = [&f](std::size_t b1, std::size_t b3r, std::size_t b3, std::size_t b5r, std::size_t b5,
                        std::size_t pp) { return InceptionSpec{f(b1), f(b3r), f(b3), f(b5r), f(b5), f(pp)}; };

  ModelSpec spec;
  spec.arch = arch;
  spec.input_size = input_size;
  spec.preset = preset;
  auto& L = spec.layers;

  const auto stem = [&] {
    L.push_back(ConvSpec{f(64), 7, 2});
    L.push_back(BatchNormSpec{});
    L.push_back(ReluSpec{});
    L.push_back(MaxPoolSpec{3, 2});
  };
  const auto dense_head = [&] {
    L.push_back(GlobalAvgPoolSpec{});
    L.push_back(DenseSpec{32});
    L.push_back(ReluSpec{});
    L.push_back(DenseSpec{2});
    L.push_back(ReluSpec{});
    L.push_back(DenseSpec{1});
    spec.head = Head::SigmoidBCE;
  };

  switch (arch) {
    case Arch::ResNet:
      stem();
      L.push_back(ResidualUnitSpec{f(64), 1, "relu"});
      L.push_back(ResidualUnitSpec{f(128), 2, "relu"});
      L.push_back(ResidualUnitSpec{f(256), 2, "relu"});
      L.push_back(ResidualUnitSpec{f(512), 2, "relu"});
      dense_head();
      break;
    case Arch::GoogLeNet:
      stem();
      L.push_back(inception(64, 96, 128, 16, 32, 32));
      L.push_back(MaxPoolSpec{3, 2});
      L.push_back(inception(128, 128, 192, 32, 96, 64));
      L.push_back(inception(192, 96, 208, 16, 48, 64));
      L.push_back(inception(160, 112, 224, 24, 64, 64));
      L.push_back(MaxPoolSpec{3, 2});
      L.push_back(inception(256, 160, 320, 32, 128, 128));
      dense_head();
      break;
    case Arch::Xception:
      L.push_back(SepConvSpec{f(32), 3, 2});
      L.push_back(BatchNormSpec{});
      L.push_back(ReluSpec{});
      L.push_back(XceptionUnitSpec{f(64), true, true});
      for (int i = 0; i < 3; ++i) L.push_back(XceptionUnitSpec{f(64), false, false});
      L.push_back(XceptionUnitSpec{f(128), true, false});
      L.push_back(SepConvSpec{f(64), 3, 1});
      L.push_back(BatchNormSpec{});
      L.push_back(ReluSpec{});
      L.push_back(FlattenSpec{});
      L.push_back(DenseSpec{2});
      spec.head = Head::SoftmaxCE;
      break;
  }
  return spec;
}

namespace {

LayerPtr instantiate(const LayerSpec& layer, const Shape& in) {
  const auto need4 = [&](const char* what) {
    if (in.size() != 4) throw Error(ErrorCode::ShapeMismatch, std::string(what) + " needs a rank-4 input, got " + shape_string(in));
    return in[1];
  };
  return std::visit(
      Overloaded{
          [&](const ConvSpec& s) -> LayerPtr {
            return std::make_unique<Conv2D>(need4("conv"), s.filters, s.kernel, s.stride, Padding::Same);
          },
          [&](const SepConvSpec& s) -> LayerPtr {
            return std::make_unique<SeparableConv2D>(need4("sepconv"), s.filters, s.kernel, s.stride, Padding::Same);
          },
          [&](const BatchNormSpec&) -> LayerPtr {
            if (in.size() != 4 && in.size() != 2) throw Error(ErrorCode::ShapeMismatch, "batchnorm input rank");
            return std::make_unique<BatchNorm>(in[1]);
          },
          [&](const ReluSpec&) -> LayerPtr { return std::make_unique<ReLU>(); },
          [&](const MaxPoolSpec& s) -> LayerPtr { return std::make_unique<MaxPool2D>(s.window, s.stride); },
          [&](const GlobalAvgPoolSpec&) -> LayerPtr { return std::make_unique<GlobalAvgPool>(); },
          [&](const FlattenSpec&) -> LayerPtr { return std::make_unique<Flatten>(); },
          [&](const DenseSpec& s) -> LayerPtr {
            if (in.size() != 2) throw Error(ErrorCode::ShapeMismatch, "dense needs a flattened input, got " + shape_string(in));
            return std::make_unique<Dense>(in[1], s.units);
          },
          [&](const ResidualUnitSpec& s) -> LayerPtr { return std::make_unique<ResidualUnit>(need4("residual"), s); },
          [&](const InceptionSpec& s) -> LayerPtr { return std::make_unique<InceptionModule>(need4("inception"), s); },
          [&](const XceptionUnitSpec& s) -> LayerPtr { return std::make_unique<XceptionUnit>(need4("xception"), s); },
      },
      layer);
}

}  // namespace

std::vector<Shape> shape_chain(const ModelSpec& spec) {
  Model model(spec);
  std::vector<Shape> shapes;
  Shape s = model.input_shape(1);
  for (std::size_t i = 0; i < model.network().size(); ++i) {
    s = model.network().layer(i).output_shape(s);
    shapes.push_back(s);
  }
  if (s != Shape{1, spec.output_units()}) {
    throw Error(ErrorCode::ShapeMismatch, "model output " + shape_string(s) + " does not match head");
  }
  return shapes;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_size == 0) throw Error(ErrorCode::UnsupportedInputSize, "input size 0");
  Shape s = input_shape(1);
  for (const LayerSpec& l : spec_.layers) {
    LayerPtr layer = instantiate(l, s);
    s = layer->output_shape(s);
    network_.add(std::move(layer));
  }
  if (s != Shape{1, spec_.output_units()}) {
    throw Error(ErrorCode::ShapeMismatch, "model output " + shape_string(s) + " does not match head");
  }
}

Tensor Model::forward(const Tensor& x) { return network_.forward(x); }

Tensor Model::infer(const Tensor& x) const { return network_.infer(x); }

double Model::loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits) const {
  return spec_.head == Head::SigmoidBCE ? sigmoid_bce_loss(logits, labels, dlogits)
                                        : softmax_ce_loss(logits, labels, dlogits);
}

std::vector<double> Model::positive_scores(const Tensor& logits) const {
  std::vector<double> scores(logits.dim(0));
  if (spec_.head == Head::SigmoidBCE) {
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = sigmoid(logits[i]);
  } else {
    const Tensor p = softmax_rows(logits);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = p[2 * i + 1];
  }
  return scores;
}

std::vector<NamedParameter> Model::parameters() {
  std::vector<NamedParameter> out;
  network_.collect("net", out);
  return out;
}

std::vector<std::pair<std::string, const Parameter*>> Model::parameters() const {
  std::vector<NamedParameter> named = const_cast<Model*>(this)->parameters();
  std::vector<std::pair<std::string, const Parameter*>> out;
  out.reserve(named.size());
  for (auto& p : named) out.emplace_back(std::move(p.name), p.param);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : parameters()) {
    if (p->trainable) n += p->value.size();
  }
  return n;
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& np : parameters()) {
    Parameter& p = *np.param;
    switch (p.init) {
      case Init::Zeros: p.value.fill(0.0); break;
      case Init::Ones: p.value.fill(1.0); break;
      case Init::HeUniform: {
        const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, p.fan_in)));
        for (auto& v : p.value.values()) v = rng.uniform(-limit, limit);
        break;
      }
    }
    p.grad.fill(0.0);
  }
  round_parameters_to_float();
  initialized_ = true;
}

void Model::zero_grad() {
  for (auto& np : parameters()) np.param->grad.fill(0.0);
}

void Model::round_parameters_to_float() {
  for (auto& np : parameters()) {
    for (auto& v : np.param->value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace tender::nn
