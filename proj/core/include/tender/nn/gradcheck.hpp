#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tender/nn/layers.hpp"
#include "tender/nn/model.hpp"

namespace tender::nn {

struct GradCheckOptions {
  double relative_step = 1e-5;  // h = relative_step * max(1, |v|)
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  double raw_rel_error = 0.0;  // same, without the rounding allowance
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU or pooling kink
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;  // "input" first, then parameters
  double max_rel_error = 0.0;
  double raw_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error of one tensor: max |analytic - numeric| divided by
// max(max |analytic|, max |numeric|, 1e-6). Per-element differences are
// first reduced by the rounding bound of the central difference, so tensors
// whose true gradient is zero (a bias feeding batchnorm) do not fail on noise.
//
// Layer objective: sum(r * layer.forward(x)) with seeded random x and r.
GradCheckReport grad_check(Layer& layer, const Shape& input_shape, const GradCheckOptions& options = {});

// Model objective: the model's own training loss on seeded random inputs
// and balanced labels.
GradCheckReport grad_check(Model& model, std::size_t batch, const GradCheckOptions& options = {});

}  // namespace tender::nn
