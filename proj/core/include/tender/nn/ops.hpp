#pragma once

// Stateless forward/backward kernels. Layers (layers.hpp) own parameters and
// caches and delegate the arithmetic here. Every kernel uses a fixed loop and
// reduction order, so results are bitwise reproducible and independent of the
// batch a sample is evaluated in.

#include <cstddef>
#include <span>
#include <vector>

#include "tender/nn/tensor.hpp"

namespace tender::nn {

enum class Padding { Same, Valid };

struct WindowGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

// SAME: out = ceil(in / stride), padding split with the extra pixel after.
// VALID: out = (in - k) / stride + 1, requires in >= k.
WindowGeometry window_geometry(std::size_t in, std::size_t k, std::size_t stride, Padding padding);

// C[MxN] += A[MxK] * B[KxN], all row-major with explicit leading dimensions.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);

// --- convolution ----------------------------------------------------------
// kernel: (F, C, kh, kw); bias: (F)
Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                      Padding padding);

struct ConvGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};
ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy, std::size_t stride,
                          Padding padding);

// kernel: (C, 1, kh, kw); one filter per input channel, no bias.
Tensor depthwise_conv2d_forward(const Tensor& x, const Tensor& kernel, std::size_t stride, Padding padding);

struct DepthwiseGrads {
  Tensor input;
  Tensor kernel;
};
DepthwiseGrads depthwise_conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy,
                                         std::size_t stride, Padding padding);

// Depthwise k x k followed by a 1x1 pointwise (F, C, 1, 1) convolution with bias.
Tensor separable_conv2d_forward(const Tensor& x, const Tensor& depthwise, const Tensor& pointwise,
                                const Tensor& bias, std::size_t stride, Padding padding);

struct SeparableGrads {
  Tensor input;
  Tensor depthwise;
  Tensor pointwise;
  Tensor bias;
};
SeparableGrads separable_conv2d_backward(const Tensor& x, const Tensor& depthwise, const Tensor& pointwise,
                                         const Tensor& dy, std::size_t stride, Padding padding);

// --- batch normalization (per channel over N, H, W) -------------------------
struct BatchNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
  std::vector<double> mean;
  std::vector<double> var;  // biased batch variance
};

Tensor batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                               BatchNormCache& cache);
Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                       const Tensor& running_var, double eps);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& dy);

// --- pooling ----------------------------------------------------------------
struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Padded cells never win; ties go to the first cell in scan order.
PoolResult maxpool2d_forward(const Tensor& x, std::size_t window, std::size_t stride,
                             Padding padding = Padding::Same);
Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax, const Tensor& dy);

Tensor global_avg_pool_forward(const Tensor& x);  // (N,C,H,W) -> (N,C)
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& dy);

// --- dense ------------------------------------------------------------------
// x: (N, D), weight: (D, U), bias: (U)
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& dy);

// --- elementwise / structural ----------------------------------------------
Tensor concat_channels(std::span<const Tensor> inputs);
std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> channels);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);
Tensor add(const Tensor& a, const Tensor& b);

// --- heads --------------------------------------------------------------
double sigmoid(double z);
Tensor softmax_rows(const Tensor& logits);

// Mean loss over the batch; writes d(loss)/d(logits) when `dlogits` is set.
double sigmoid_bce_loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits);
double softmax_ce_loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits);

}  // namespace tender::nn
