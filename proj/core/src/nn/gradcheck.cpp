#include "tender/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "tender/nn/rng.hpp"

namespace tender::nn {

namespace {

struct Probe {
  // Sets `scale` to a magnitude bound on the rounding error of the value.
  std::function<double(double& scale)> objective;
  std::function<std::uint64_t()> signature;
};

TensorCheck check_tensor(const std::string& name, std::span<double> values, std::span<const double> analytic,
                         const Probe& probe, std::uint64_t base_signature, double relative_step) {
  TensorCheck tc;
  tc.name = name;
  double max_diff = 0.0;
  double raw_diff = 0.0;
  double max_a = 0.0;
  double max_n = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    const double h = relative_step * std::max(1.0, std::abs(orig));
    double up_scale = 0.0;
    double down_scale = 0.0;
    values[i] = orig + h;
    const double up = probe.objective(up_scale);
    const bool up_ok = probe.signature() == base_signature;
    values[i] = orig - h;
    const double down = probe.objective(down_scale);
    const bool down_ok = probe.signature() == base_signature;
    values[i] = orig;
    if (!up_ok || !down_ok) {
      ++tc.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    // Differences within the rounding error of the two objective values
    // carry no information.
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (up_scale + down_scale + 1.0) / (2.0 * h);
    max_diff = std::max(max_diff, std::abs(numeric - analytic[i]) - noise);
    raw_diff = std::max(raw_diff, std::abs(numeric - analytic[i]));
    max_a = std::max(max_a, std::abs(analytic[i]));
    max_n = std::max(max_n, std::abs(numeric));
    ++tc.checked;
  }
  tc.max_rel_error = max_diff / std::max({max_a, max_n, 1e-6});
  tc.raw_rel_error = raw_diff / std::max({max_a, max_n, 1e-6});
  return tc;
}

void finish(GradCheckReport& report, double tolerance) {
  report.tolerance = tolerance;
  report.max_rel_error = 0.0;
  report.raw_rel_error = 0.0;
  bool any_checked = false;
  for (const auto& t : report.tensors) {
    report.max_rel_error = std::max(report.max_rel_error, t.max_rel_error);
    report.raw_rel_error = std::max(report.raw_rel_error, t.raw_rel_error);
    any_checked = any_checked || t.checked > 0;
  }
  report.passed = any_checked && report.max_rel_error < tolerance;
}

Tensor random_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

GradCheckReport grad_check(Layer& layer, const Shape& input_shape, const GradCheckOptions& options) {
  Rng rng(options.seed);
  Tensor x = random_tensor(input_shape, rng);
  std::vector<NamedParameter> params;
  layer.collect("", params);
  for (auto& np : params) {
    if (!np.param->trainable) continue;
    if (np.param->init == Init::HeUniform) {
      const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, np.param->fan_in)));
      for (auto& v : np.param->value.values()) v = rng.uniform(-limit, limit);
    } else {
      // Non-trivial gamma/beta/bias so their gradients are exercised.
      for (auto& v : np.param->value.values()) v += rng.uniform(-0.5, 0.5);
    }
  }

  const Tensor y0 = layer.forward(x);
  const Tensor r = random_tensor(y0.shape(), rng);
  for (auto& np : params) np.param->grad.fill(0.0);
  const Tensor dx = layer.backward(r);
  const std::uint64_t base = layer.activation_signature();

  Probe probe{[&](double& scale) {
                const Tensor y = layer.forward(x);
                double s = 0.0;
                scale = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                  s += r[i] * y[i];
                  scale += std::abs(r[i] * y[i]);
                }
                return s;
              },
              [&] { return layer.activation_signature(); }};

  GradCheckReport report;
  report.tensors.push_back(check_tensor("input", x.values(), dx.values(), probe, base, options.relative_step));
  for (auto& np : params) {
    if (!np.param->trainable) continue;
    report.tensors.push_back(check_tensor(np.name, np.param->value.values(), np.param->grad.values(), probe, base,
                                          options.relative_step));
  }
  finish(report, options.tolerance);
  return report;
}

GradCheckReport grad_check(Model& model, std::size_t batch, const GradCheckOptions& options) {
  Rng rng(options.seed);
  if (!model.initialized()) model.initialize(options.seed);
  Tensor x(model.input_shape(batch));
  for (auto& v : x.values()) v = rng.uniform();
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 2);

  model.zero_grad();
  const Tensor logits = model.forward(x);
  Tensor dlogits;
  model.loss(logits, labels, &dlogits);
  const Tensor dx = model.backward(dlogits);
  const std::uint64_t base = model.network().activation_signature();

  Probe probe{[&](double& scale) {
                const double l = model.loss(model.forward(x), labels, nullptr);
                scale = std::abs(l);
                return l;
              },
              [&] { return model.network().activation_signature(); }};

  GradCheckReport report;
  report.tensors.push_back(check_tensor("input", x.values(), dx.values(), probe, base, options.relative_step));
  for (auto& np : model.parameters()) {
    if (!np.param->trainable) continue;
    report.tensors.push_back(check_tensor(np.name, np.param->value.values(), np.param->grad.values(), probe, base,
                                          options.relative_step));
  }
  finish(report, options.tolerance);
  return report;
}

}  // namespace tender::nn
