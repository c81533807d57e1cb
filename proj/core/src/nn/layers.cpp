#include "tender/nn/layers.hpp"

#include <string>

namespace tender::nn {

namespace {

Parameter make_param(Shape shape, Init init, std::size_t fan_in = 0, bool trainable = true) {
  Parameter p;
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  p.trainable = trainable;
  p.init = init;
  p.fan_in = fan_in;
  if (init == Init::Ones) p.value.fill(1.0);
  return p;
}

void accumulate(Tensor& into, const Tensor& delta) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += delta[i];
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

void require_input(const Shape& in, std::size_t channels, const char* what) {
  if (in.size() != 4 || in[1] != channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected (N," + std::to_string(channels) +
                                              ",H,W), got " + shape_string(in));
  }
}

Shape conv_like_shape(const Shape& in, std::size_t filters, std::size_t k, std::size_t stride, Padding padding) {
  return {in[0], filters, window_geometry(in[2], k, stride, padding).out,
          window_geometry(in[3], k, stride, padding).out};
}

}  // namespace

void Layer::collect(const std::string&, std::vector<NamedParameter>&) {}

// --- Conv2D -------------------------------------------------------------------

Conv2D::Conv2D(std::size_t in_channels, std::size_t filters, std::size_t k, std::size_t stride, Padding padding)
    : kernel(make_param({filters, in_channels, k, k}, Init::HeUniform, in_channels * k * k)),
      bias(make_param({filters}, Init::Zeros)),
      stride_(stride),
      padding_(padding) {}

Shape Conv2D::output_shape(const Shape& in) const {
  require_input(in, kernel.value.dim(1), "conv");
  return conv_like_shape(in, kernel.value.dim(0), kernel.value.dim(2), stride_, padding_);
}

Tensor Conv2D::forward(const Tensor& x) {
  input_ = x;
  return conv2d_forward(x, kernel.value, bias.value, stride_, padding_);
}

Tensor Conv2D::infer(const Tensor& x) const { return conv2d_forward(x, kernel.value, bias.value, stride_, padding_); }

Tensor Conv2D::backward(const Tensor& dy) {
  ConvGrads g = conv2d_backward(input_, kernel.value, dy, stride_, padding_);
  accumulate(kernel.grad, g.kernel);
  accumulate(bias.grad, g.bias);
  return std::move(g.input);
}

void Conv2D::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  out.push_back({prefix + ".kernel", &kernel});
  out.push_back({prefix + ".bias", &bias});
}

// --- SeparableConv2D ------------------------------------------------------------

SeparableConv2D::SeparableConv2D(std::size_t in_channels, std::size_t filters, std::size_t k, std::size_t stride,
                                 Padding padding)
    : depthwise(make_param({in_channels, 1, k, k}, Init::HeUniform, k * k)),
      pointwise(make_param({filters, in_channels, 1, 1}, Init::HeUniform, in_channels)),
      bias(make_param({filters}, Init::Zeros)),
      stride_(stride),
      padding_(padding) {}

Shape SeparableConv2D::output_shape(const Shape& in) const {
  require_input(in, depthwise.value.dim(0), "sepconv");
  return conv_like_shape(in, pointwise.value.dim(0), depthwise.value.dim(2), stride_, padding_);
}

Tensor SeparableConv2D::forward(const Tensor& x) {
  input_ = x;
  mid_ = depthwise_conv2d_forward(x, depthwise.value, stride_, padding_);
  return conv2d_forward(mid_, pointwise.value, bias.value, 1, Padding::Valid);
}

Tensor SeparableConv2D::infer(const Tensor& x) const {
  return separable_conv2d_forward(x, depthwise.value, pointwise.value, bias.value, stride_, padding_);
}

Tensor SeparableConv2D::backward(const Tensor& dy) {
  ConvGrads pw = conv2d_backward(mid_, pointwise.value, dy, 1, Padding::Valid);
  DepthwiseGrads dw = depthwise_conv2d_backward(input_, depthwise.value, pw.input, stride_, padding_);
  accumulate(pointwise.grad, pw.kernel);
  accumulate(bias.grad, pw.bias);
  accumulate(depthwise.grad, dw.kernel);
  return std::move(dw.input);
}

void SeparableConv2D::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  out.push_back({prefix + ".depthwise", &depthwise});
  out.push_back({prefix + ".pointwise", &pointwise});
  out.push_back({prefix + ".bias", &bias});
}

// --- BatchNorm ------------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(make_param({channels}, Init::Ones)),
      beta(make_param({channels}, Init::Zeros)),
      running_mean(make_param({channels}, Init::Zeros, 0, false)),
      running_var(make_param({channels}, Init::Ones, 0, false)) {}

Tensor BatchNorm::forward(const Tensor& x) {
  Tensor y = batchnorm_train_forward(x, gamma.value, beta.value, kEpsilon, cache_);
  // stored at float32 precision like every other parameter, so a forward
  // pass outside train_model still leaves the layer exactly saveable
  auto blend = [](double running, double batch) {
    return static_cast<double>(static_cast<float>(kMomentum * running + (1.0 - kMomentum) * batch));
  };
  for (std::size_t c = 0; c < cache_.mean.size(); ++c) {
    running_mean.value[c] = blend(running_mean.value[c], cache_.mean[c]);
    running_var.value[c] = blend(running_var.value[c], cache_.var[c]);
  }
  return y;
}

Tensor BatchNorm::infer(const Tensor& x) const {
  return batchnorm_infer(x, gamma.value, beta.value, running_mean.value, running_var.value, kEpsilon);
}

Tensor BatchNorm::backward(const Tensor& dy) {
  BatchNormGrads g = batchnorm_backward(cache_, gamma.value, dy);
  accumulate(gamma.grad, g.gamma);
  accumulate(beta.grad, g.beta);
  return std::move(g.input);
}

void BatchNorm::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
  out.push_back({prefix + ".running_mean", &running_mean});
  out.push_back({prefix + ".running_var", &running_var});
}

// --- ReLU / pooling / reshape ----------------------------------------------------

Tensor ReLU::forward(const Tensor& x) {
  input_ = x;
  return relu_forward(x);
}

std::uint64_t ReLU::activation_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < input_.size(); ++i) {
    h ^= input_[i] > 0.0 ? 1u : 2u;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Shape MaxPool2D::output_shape(const Shape& in) const {
  if (in.size() != 4) throw Error(ErrorCode::ShapeMismatch, "maxpool: expected rank 4, got " + shape_string(in));
  return {in[0], in[1], window_geometry(in[2], window_, stride_, Padding::Same).out,
          window_geometry(in[3], window_, stride_, Padding::Same).out};
}

Tensor MaxPool2D::forward(const Tensor& x) {
  PoolResult r = maxpool2d_forward(x, window_, stride_, Padding::Same);
  input_shape_ = x.shape();
  argmax_ = std::move(r.argmax);
  return std::move(r.output);
}

Tensor MaxPool2D::infer(const Tensor& x) const {
  return maxpool2d_forward(x, window_, stride_, Padding::Same).output;
}

Tensor MaxPool2D::backward(const Tensor& dy) { return maxpool2d_backward(input_shape_, argmax_, dy); }

std::uint64_t MaxPool2D::activation_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto a : argmax_) h = mix(h, a);
  return h;
}

Shape GlobalAvgPool::output_shape(const Shape& in) const {
  if (in.size() != 4) throw Error(ErrorCode::ShapeMismatch, "gap: expected rank 4, got " + shape_string(in));
  return {in[0], in[1]};
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  input_shape_ = x.shape();
  return global_avg_pool_forward(x);
}

Shape Flatten::output_shape(const Shape& in) const {
  if (in.empty()) throw Error(ErrorCode::ShapeMismatch, "flatten: empty shape");
  return {in[0], shape_size(in) / in[0]};
}

Tensor Flatten::forward(const Tensor& x) {
  input_shape_ = x.shape();
  return infer(x);
}

Tensor Flatten::infer(const Tensor& x) const { return x.reshaped(output_shape(x.shape())); }

// --- Dense ------------------------------------------------------------------------

Dense::Dense(std::size_t inputs, std::size_t units)
    : weight(make_param({inputs, units}, Init::HeUniform, inputs)), bias(make_param({units}, Init::Zeros)) {}

Shape Dense::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != weight.value.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "dense: expected (N," + std::to_string(weight.value.dim(0)) +
                                              "), got " + shape_string(in));
  }
  return {in[0], weight.value.dim(1)};
}

Tensor Dense::forward(const Tensor& x) {
  input_ = x;
  return dense_forward(x, weight.value, bias.value);
}

Tensor Dense::infer(const Tensor& x) const { return dense_forward(x, weight.value, bias.value); }

Tensor Dense::backward(const Tensor& dy) {
  DenseGrads g = dense_backward(input_, weight.value, dy);
  accumulate(weight.grad, g.weight);
  accumulate(bias.grad, g.bias);
  return std::move(g.input);
}

void Dense::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

// --- Sequential -------------------------------------------------------------------

Shape Sequential::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor t = x;
  for (auto& l : layers_) t = l->forward(t);
  return t;
}

Tensor Sequential::infer(const Tensor& x) const {
  Tensor t = x;
  for (const auto& l : layers_) t = l->infer(t);
  return t;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::string index = std::to_string(i);
    if (index.size() < 2) index.insert(0, 2 - index.size(), '0');
    layers_[i]->collect(prefix + "." + index + "_" + std::string(layers_[i]->kind()), out);
  }
}

std::uint64_t Sequential::activation_signature() const {
  std::uint64_t h = 0;
  for (const auto& l : layers_) h = mix(h, l->activation_signature());
  return h;
}

// --- ResidualUnit ---------------------------------------------------------------

ResidualUnit::ResidualUnit(std::size_t in_channels, const ResidualUnitSpec& spec)
    : in_channels_(in_channels), spec_(spec) {
  if (spec.filters == 0 || (spec.stride != 1 && spec.stride != 2)) {
    throw Error(ErrorCode::ShapeMismatch, "residual unit: filters >= 1 and stride in {1,2} required");
  }
  if (spec.activation != "relu") {
    throw Error(ErrorCode::ShapeMismatch, "residual unit: unsupported activation '" + spec.activation + "'");
  }
  main_.add(std::make_unique<Conv2D>(in_channels, spec.filters, 3, spec.stride, Padding::Same));
  main_.add(std::make_unique<BatchNorm>(spec.filters));
  main_.add(std::make_unique<ReLU>());
  main_.add(std::make_unique<Conv2D>(spec.filters, spec.filters, 3, 1, Padding::Same));
  main_.add(std::make_unique<BatchNorm>(spec.filters));
  if (spec.stride != 1 || in_channels != spec.filters) {
    skip_.add(std::make_unique<Conv2D>(in_channels, spec.filters, 1, spec.stride, Padding::Same));
    skip_.add(std::make_unique<BatchNorm>(spec.filters));
  }
}

Shape ResidualUnit::output_shape(const Shape& in) const {
  require_input(in, in_channels_, "residual unit");
  return main_.output_shape(in);
}

Tensor ResidualUnit::forward(const Tensor& x) {
  Tensor m = main_.forward(x);
  Tensor s = skip_.empty() ? x : skip_.forward(x);
  return merge_.forward(add(m, s));
}

Tensor ResidualUnit::infer(const Tensor& x) const {
  Tensor m = main_.infer(x);
  Tensor s = skip_.empty() ? x : skip_.infer(x);
  return relu_forward(add(m, s));
}

Tensor ResidualUnit::backward(const Tensor& dy) {
  const Tensor dsum = merge_.backward(dy);
  Tensor dx = main_.backward(dsum);
  const Tensor dskip = skip_.empty() ? dsum : skip_.backward(dsum);
  accumulate(dx, dskip);
  return dx;
}

void ResidualUnit::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  main_.collect(prefix + ".main", out);
  skip_.collect(prefix + ".skip", out);
}

std::uint64_t ResidualUnit::activation_signature() const {
  return mix(mix(main_.activation_signature(), skip_.activation_signature()), merge_.activation_signature());
}

// --- InceptionModule -------------------------------------------------------------

namespace {

void add_conv_bn_relu(Sequential& seq, std::size_t in, std::size_t filters, std::size_t k) {
  seq.add(std::make_unique<Conv2D>(in, filters, k, 1, Padding::Same));
  seq.add(std::make_unique<BatchNorm>(filters));
  seq.add(std::make_unique<ReLU>());
}

}  // namespace

InceptionModule::InceptionModule(std::size_t in_channels, const InceptionSpec& spec)
    : in_channels_(in_channels), spec_(spec) {
  if (!spec.b1 || !spec.b3_reduce || !spec.b3 || !spec.b5_reduce || !spec.b5 || !spec.pool_proj) {
    throw Error(ErrorCode::ShapeMismatch, "inception: all branch filter counts must be >= 1");
  }
  add_conv_bn_relu(branches_[0], in_channels, spec.b1, 1);
  add_conv_bn_relu(branches_[1], in_channels, spec.b3_reduce, 1);
  add_conv_bn_relu(branches_[1], spec.b3_reduce, spec.b3, 3);
  add_conv_bn_relu(branches_[2], in_channels, spec.b5_reduce, 1);
  add_conv_bn_relu(branches_[2], spec.b5_reduce, spec.b5, 5);
  branches_[3].add(std::make_unique<MaxPool2D>(3, 1));
  add_conv_bn_relu(branches_[3], in_channels, spec.pool_proj, 1);
}

Shape InceptionModule::output_shape(const Shape& in) const {
  require_input(in, in_channels_, "inception");
  return {in[0], spec_.output_channels(), in[2], in[3]};
}

Tensor InceptionModule::forward(const Tensor& x) {
  std::vector<Tensor> outs;
  for (auto& b : branches_) outs.push_back(b.forward(x));
  return concat_channels(outs);
}

Tensor InceptionModule::infer(const Tensor& x) const {
  std::vector<Tensor> outs;
  for (const auto& b : branches_) outs.push_back(b.infer(x));
  return concat_channels(outs);
}

Tensor InceptionModule::backward(const Tensor& dy) {
  const std::size_t channels[4] = {spec_.b1, spec_.b3, spec_.b5, spec_.pool_proj};
  std::vector<Tensor> parts = split_channels(dy, channels);
  Tensor dx = branches_[0].backward(parts[0]);
  for (std::size_t i = 1; i < 4; ++i) accumulate(dx, branches_[i].backward(parts[i]));
  return dx;
}

void InceptionModule::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  static const char* names[4] = {".b1", ".b3", ".b5", ".pool"};
  for (std::size_t i = 0; i < 4; ++i) branches_[i].collect(prefix + names[i], out);
}

std::uint64_t InceptionModule::activation_signature() const {
  std::uint64_t h = 0;
  for (const auto& b : branches_) h = mix(h, b.activation_signature());
  return h;
}

// --- XceptionUnit ------------------------------------------------------------------

XceptionUnit::XceptionUnit(std::size_t in_channels, const XceptionUnitSpec& spec)
    : in_channels_(in_channels), spec_(spec) {
  if (spec.filters == 0) throw Error(ErrorCode::ShapeMismatch, "xception unit: filters must be >= 1");
  if (spec.is_first && !spec.is_entry_exit) {
    throw Error(ErrorCode::ShapeMismatch, "xception unit: is_first requires is_entry_exit");
  }
  if (!spec.is_entry_exit && in_channels != spec.filters) {
    throw Error(ErrorCode::ShapeMismatch, "xception middle unit: identity skip needs in_channels == filters (" +
                                              std::to_string(in_channels) + " vs " + std::to_string(spec.filters) + ")");
  }
  std::size_t channels = in_channels;
  const int blocks = (spec.is_entry_exit && spec.is_first) ? 1 : 2;
  for (int b = 0; b < blocks; ++b) {
    main_.add(std::make_unique<ReLU>());
    main_.add(std::make_unique<SeparableConv2D>(channels, spec.filters, 3, 1, Padding::Same));
    main_.add(std::make_unique<BatchNorm>(spec.filters));
    channels = spec.filters;
  }
  if (spec.is_entry_exit) {
    main_.add(std::make_unique<MaxPool2D>(3, 2));
    skip_.add(std::make_unique<Conv2D>(in_channels, spec.filters, 1, 2, Padding::Same));
    skip_.add(std::make_unique<BatchNorm>(spec.filters));
  }
}

Shape XceptionUnit::output_shape(const Shape& in) const {
  require_input(in, in_channels_, "xception unit");
  return main_.output_shape(in);
}

Tensor XceptionUnit::forward(const Tensor& x) {
  Tensor m = main_.forward(x);
  Tensor s = skip_.empty() ? x : skip_.forward(x);
  return add(m, s);
}

Tensor XceptionUnit::infer(const Tensor& x) const {
  Tensor m = main_.infer(x);
  Tensor s = skip_.empty() ? x : skip_.infer(x);
  return add(m, s);
}

Tensor XceptionUnit::backward(const Tensor& dy) {
  Tensor dx = main_.backward(dy);
  const Tensor dskip = skip_.empty() ? dy : skip_.backward(dy);
  accumulate(dx, dskip);
  return dx;
}

void XceptionUnit::collect(const std::string& prefix, std::vector<NamedParameter>& out) {
  main_.collect(prefix + ".main", out);
  skip_.collect(prefix + ".skip", out);
}

std::uint64_t XceptionUnit::activation_signature() const {
  return mix(main_.activation_signature(), skip_.activation_signature());
}

}  // namespace tender::nn
