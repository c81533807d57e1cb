#include "tender/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tender::nn {

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t kh, kw, stride;
  WindowGeometry gy, gx;

  std::size_t out_pixels() const { return gy.out * gx.out; }
  std::size_t patch() const { return c * kh * kw; }
  bool direct() const { return kh == 1 && kw == 1 && stride == 1 && gy.pad_before == 0 && gx.pad_before == 0; }
};

ConvGeometry conv_geometry(const Tensor& x, std::size_t channels, std::size_t kh, std::size_t kw,
                           std::size_t stride, Padding padding, const char* what) {
  require_rank(x, 4, what);
  if (x.dim(1) != channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": input has " + std::to_string(x.dim(1)) +
                                              " channels, kernel expects " + std::to_string(channels));
  }
  if (stride == 0) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": stride must be >= 1");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kh, kw, stride, {}, {}};
  g.gy = window_geometry(g.h, kh, stride, padding);
  g.gx = window_geometry(g.w, kw, stride, padding);
  return g;
}

// col[(c*kh + i)*kw + j][oy*ow + ox] = x[c][oy*s + i - pt][ox*s + j - pl]
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t ow = g.gx.out;
  const std::size_t oh = g.gy.out;
  for (std::size_t c = 0; c < g.c; ++c) {
    const double* plane = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = col + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long long iy = static_cast<long long>(oy * g.stride + i) - static_cast<long long>(g.gy.pad_before);
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<long long>(g.h)) {
            std::fill_n(dst, ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long long ix = static_cast<long long>(ox * g.stride + j) - static_cast<long long>(g.gx.pad_before);
            dst[ox] = (ix < 0 || ix >= static_cast<long long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* col, double* x) {
  const std::size_t ow = g.gx.out;
  const std::size_t oh = g.gy.out;
  for (std::size_t c = 0; c < g.c; ++c) {
    double* plane = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = col + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long long iy = static_cast<long long>(oy * g.stride + i) - static_cast<long long>(g.gy.pad_before);
          if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long long ix = static_cast<long long>(ox * g.stride + j) - static_cast<long long>(g.gx.pad_before);
            if (ix >= 0 && ix < static_cast<long long>(g.w)) dst[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock);
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

}  // namespace

WindowGeometry window_geometry(std::size_t in, std::size_t k, std::size_t stride, Padding padding) {
  if (stride == 0 || k == 0) throw Error(ErrorCode::ShapeMismatch, "window and stride must be >= 1");
  if (padding == Padding::Valid) {
    if (in < k) {
      throw Error(ErrorCode::ShapeMismatch,
                  "VALID window " + std::to_string(k) + " larger than input " + std::to_string(in));
    }
    return {(in - k) / stride + 1, 0};
  }
  if (in == 0) throw Error(ErrorCode::ShapeMismatch, "empty spatial dimension");
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + k;
  const std::size_t pad_total = needed > in ? needed - in : 0;
  return {out, pad_total / 2};
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc) {
  constexpr std::size_t kColBlock = 256;
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t jn = std::min(kColBlock, n - j0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      double* __restrict c0 = c + i * ldc + j0;
      double* __restrict c1 = c0 + ldc;
      double* __restrict c2 = c1 + ldc;
      double* __restrict c3 = c2 + ldc;
      const double* arow = a + i * lda;
      for (std::size_t p = 0; p < k; ++p) {
        const double a0 = arow[p];
        const double a1 = arow[lda + p];
        const double a2 = arow[2 * lda + p];
        const double a3 = arow[3 * lda + p];
        const double* __restrict bp = b + p * ldb + j0;
        for (std::size_t j = 0; j < jn; ++j) {
          const double bv = bp[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      double* __restrict c0 = c + i * ldc + j0;
      for (std::size_t p = 0; p < k; ++p) {
        const double a0 = a[i * lda + p];
        const double* __restrict bp = b + p * ldb + j0;
        for (std::size_t j = 0; j < jn; ++j) c0[j] += a0 * bp[j];
      }
    }
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                      Padding padding) {
  require_rank(kernel, 4, "conv2d kernel");
  const std::size_t filters = kernel.dim(0);
  if (bias.size() != filters) throw Error(ErrorCode::ShapeMismatch, "conv2d bias length != filters");
  const ConvGeometry g = conv_geometry(x, kernel.dim(1), kernel.dim(2), kernel.dim(3), stride, padding, "conv2d");
  const std::size_t pixels = g.out_pixels();
  const std::size_t patch = g.patch();

  Tensor y({g.n, filters, g.gy.out, g.gx.out});
  std::vector<double> col(g.direct() ? 0 : patch * pixels);
  for (std::size_t s = 0; s < g.n; ++s) {
    const double* xs = x.data() + s * g.c * g.h * g.w;
    const double* cp = xs;
    if (!g.direct()) {
      im2col(g, xs, col.data());
      cp = col.data();
    }
    double* ys = y.data() + s * filters * pixels;
    for (std::size_t f = 0; f < filters; ++f) std::fill_n(ys + f * pixels, pixels, bias[f]);
    gemm_nn(filters, pixels, patch, kernel.data(), patch, cp, pixels, ys, pixels);
  }
  return y;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy, std::size_t stride,
                          Padding padding) {
  require_rank(kernel, 4, "conv2d kernel");
  const std::size_t filters = kernel.dim(0);
  const ConvGeometry g = conv_geometry(x, kernel.dim(1), kernel.dim(2), kernel.dim(3), stride, padding, "conv2d");
  const std::size_t pixels = g.out_pixels();
  const std::size_t patch = g.patch();
  if (dy.shape() != Shape{g.n, filters, g.gy.out, g.gx.out}) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d backward: gradient shape " + shape_string(dy.shape()));
  }

  ConvGrads grads{Tensor(x.shape()), Tensor(kernel.shape()), Tensor({filters})};
  std::vector<double> kernel_t(patch * filters);
  transpose(kernel.data(), filters, patch, kernel_t.data());
  std::vector<double> col(patch * pixels);
  std::vector<double> col_t(pixels * patch);
  std::vector<double> dcol(patch * pixels);

  for (std::size_t s = 0; s < g.n; ++s) {
    const double* xs = x.data() + s * g.c * g.h * g.w;
    const double* dys = dy.data() + s * filters * pixels;
    const double* cp = xs;
    if (!g.direct()) {
      im2col(g, xs, col.data());
      cp = col.data();
    }
    transpose(cp, patch, pixels, col_t.data());
    gemm_nn(filters, patch, pixels, dys, pixels, col_t.data(), patch, grads.kernel.data(), patch);
    for (std::size_t f = 0; f < filters; ++f) {
      double acc = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) acc += dys[f * pixels + p];
      grads.bias[f] += acc;
    }
    double* dxs = grads.input.data() + s * g.c * g.h * g.w;
    if (g.direct()) {
      gemm_nn(patch, pixels, filters, kernel_t.data(), filters, dys, pixels, dxs, pixels);
    } else {
      std::fill(dcol.begin(), dcol.end(), 0.0);
      gemm_nn(patch, pixels, filters, kernel_t.data(), filters, dys, pixels, dcol.data(), pixels);
      col2im(g, dcol.data(), dxs);
    }
  }
  return grads;
}

Tensor depthwise_conv2d_forward(const Tensor& x, const Tensor& kernel, std::size_t stride, Padding padding) {
  require_rank(kernel, 4, "depthwise kernel");
  if (kernel.dim(1) != 1) throw Error(ErrorCode::ShapeMismatch, "depthwise kernel must be (C,1,kh,kw)");
  const ConvGeometry g = conv_geometry(x, kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding, "depthwise");
  const std::size_t oh = g.gy.out;
  const std::size_t ow = g.gx.out;
  Tensor y({g.n, g.c, oh, ow});
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t c = 0; c < g.c; ++c) {
      const double* plane = x.data() + (s * g.c + c) * g.h * g.w;
      const double* k = kernel.data() + c * g.kh * g.kw;
      double* out = y.data() + (s * g.c + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.kh; ++i) {
            const long long iy = static_cast<long long>(oy * stride + i) - static_cast<long long>(g.gy.pad_before);
            if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const long long ix = static_cast<long long>(ox * stride + j) - static_cast<long long>(g.gx.pad_before);
              if (ix < 0 || ix >= static_cast<long long>(g.w)) continue;
              acc += plane[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)] * k[i * g.kw + j];
            }
          }
          out[oy * ow + ox] = acc;
        }
      }
    }
  }
  return y;
}

DepthwiseGrads depthwise_conv2d_backward(const Tensor& x, const Tensor& kernel, const Tensor& dy,
                                         std::size_t stride, Padding padding) {
  const ConvGeometry g = conv_geometry(x, kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding, "depthwise");
  const std::size_t oh = g.gy.out;
  const std::size_t ow = g.gx.out;
  if (dy.shape() != Shape{g.n, g.c, oh, ow}) {
    throw Error(ErrorCode::ShapeMismatch, "depthwise backward: gradient shape " + shape_string(dy.shape()));
  }
  DepthwiseGrads grads{Tensor(x.shape()), Tensor(kernel.shape())};
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t c = 0; c < g.c; ++c) {
      const double* plane = x.data() + (s * g.c + c) * g.h * g.w;
      double* dplane = grads.input.data() + (s * g.c + c) * g.h * g.w;
      const double* k = kernel.data() + c * g.kh * g.kw;
      double* dk = grads.kernel.data() + c * g.kh * g.kw;
      const double* d = dy.data() + (s * g.c + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double gv = d[oy * ow + ox];
          for (std::size_t i = 0; i < g.kh; ++i) {
            const long long iy = static_cast<long long>(oy * stride + i) - static_cast<long long>(g.gy.pad_before);
            if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const long long ix = static_cast<long long>(ox * stride + j) - static_cast<long long>(g.gx.pad_before);
              if (ix < 0 || ix >= static_cast<long long>(g.w)) continue;
              const std::size_t at = static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix);
              dk[i * g.kw + j] += gv * plane[at];
              dplane[at] += gv * k[i * g.kw + j];
            }
          }
        }
      }
    }
  }
  return grads;
}

Tensor separable_conv2d_forward(const Tensor& x, const Tensor& depthwise, const Tensor& pointwise,
                                const Tensor& bias, std::size_t stride, Padding padding) {
  const Tensor mid = depthwise_conv2d_forward(x, depthwise, stride, padding);
  return conv2d_forward(mid, pointwise, bias, 1, Padding::Valid);
}

SeparableGrads separable_conv2d_backward(const Tensor& x, const Tensor& depthwise, const Tensor& pointwise,
                                         const Tensor& dy, std::size_t stride, Padding padding) {
  const Tensor mid = depthwise_conv2d_forward(x, depthwise, stride, padding);
  ConvGrads pw = conv2d_backward(mid, pointwise, dy, 1, Padding::Valid);
  DepthwiseGrads dw = depthwise_conv2d_backward(x, depthwise, pw.input, stride, padding);
  return {std::move(dw.input), std::move(dw.kernel), std::move(pw.kernel), std::move(pw.bias)};
}

namespace {

struct ChannelLayout {
  std::size_t n, c, inner;
};

ChannelLayout channel_layout(const Tensor& x, const char* what) {
  if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
  if (x.rank() == 2) return {x.dim(0), x.dim(1), 1};
  throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected rank 2 or 4, got " + shape_string(x.shape()));
}

void require_channels(const Tensor& p, std::size_t c, const char* what) {
  if (p.size() != c) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": parameter length " + std::to_string(p.size()) +
                                              " != channels " + std::to_string(c));
  }
}

}  // namespace

Tensor batchnorm_train_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                               BatchNormCache& cache) {
  const ChannelLayout l = channel_layout(x, "batchnorm");
  require_channels(gamma, l.c, "batchnorm gamma");
  require_channels(beta, l.c, "batchnorm beta");
  const double count = static_cast<double>(l.n * l.inner);
  cache.xhat = Tensor(x.shape());
  cache.inv_std.assign(l.c, 0.0);
  cache.mean.assign(l.c, 0.0);
  cache.var.assign(l.c, 0.0);
  Tensor y(x.shape());
  for (std::size_t c = 0; c < l.c; ++c) {
    double sum = 0.0;
    for (std::size_t s = 0; s < l.n; ++s) {
      const double* p = x.data() + (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t s = 0; s < l.n; ++s) {
      const double* p = x.data() + (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) sq += (p[i] - mean) * (p[i] - mean);
    }
    const double var = sq / count;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.mean[c] = mean;
    cache.var[c] = var;
    cache.inv_std[c] = inv_std;
    for (std::size_t s = 0; s < l.n; ++s) {
      const std::size_t off = (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const double xh = (x[off + i] - mean) * inv_std;
        cache.xhat[off + i] = xh;
        y[off + i] = gamma[c] * xh + beta[c];
      }
    }
  }
  return y;
}

Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                       const Tensor& running_var, double eps) {
  const ChannelLayout l = channel_layout(x, "batchnorm");
  require_channels(gamma, l.c, "batchnorm gamma");
  require_channels(beta, l.c, "batchnorm beta");
  require_channels(running_mean, l.c, "batchnorm running mean");
  require_channels(running_var, l.c, "batchnorm running variance");
  Tensor y(x.shape());
  for (std::size_t s = 0; s < l.n; ++s) {
    for (std::size_t c = 0; c < l.c; ++c) {
      const double inv_std = 1.0 / std::sqrt(running_var[c] + eps);
      const std::size_t off = (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        y[off + i] = gamma[c] * ((x[off + i] - running_mean[c]) * inv_std) + beta[c];
      }
    }
  }
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& dy) {
  require_same_shape(cache.xhat, dy, "batchnorm backward");
  const ChannelLayout l = channel_layout(dy, "batchnorm");
  const double count = static_cast<double>(l.n * l.inner);
  BatchNormGrads grads{Tensor(dy.shape()), Tensor({l.c}), Tensor({l.c})};
  for (std::size_t c = 0; c < l.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t s = 0; s < l.n; ++s) {
      const std::size_t off = (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += dy[off + i] * cache.xhat[off + i];
      }
    }
    grads.gamma[c] = sum_dy_xhat;
    grads.beta[c] = sum_dy;
    const double scale = gamma[c] * cache.inv_std[c] / count;
    for (std::size_t s = 0; s < l.n; ++s) {
      const std::size_t off = (s * l.c + c) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        grads.input[off + i] = scale * (count * dy[off + i] - sum_dy - cache.xhat[off + i] * sum_dy_xhat);
      }
    }
  }
  return grads;
}

PoolResult maxpool2d_forward(const Tensor& x, std::size_t window, std::size_t stride, Padding padding) {
  require_rank(x, 4, "maxpool2d");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const WindowGeometry gy = window_geometry(h, window, stride, padding);
  const WindowGeometry gx = window_geometry(w, window, stride, padding);
  PoolResult r{Tensor({n, c, gy.out, gx.out}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < gy.out; ++oy) {
      for (std::size_t ox = 0; ox < gx.out; ++ox, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_at = 0;
        bool found = false;
        for (std::size_t i = 0; i < window; ++i) {
          const long long iy = static_cast<long long>(oy * stride + i) - static_cast<long long>(gy.pad_before);
          if (iy < 0 || iy >= static_cast<long long>(h)) continue;
          for (std::size_t j = 0; j < window; ++j) {
            const long long ix = static_cast<long long>(ox * stride + j) - static_cast<long long>(gx.pad_before);
            if (ix < 0 || ix >= static_cast<long long>(w)) continue;
            const std::size_t at = base + static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
            if (!found || x[at] > best) {
              best = x[at];
              best_at = at;
              found = true;
            }
          }
        }
        r.output[o] = best;
        r.argmax[o] = best_at;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax, const Tensor& dy) {
  if (argmax.size() != dy.size()) throw Error(ErrorCode::ShapeMismatch, "maxpool backward: gradient size");
  Tensor dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
  return dx;
}

Tensor global_avg_pool_forward(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += x[p * inner + i];
    y[p] = acc / static_cast<double>(inner);
  }
  return y;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& dy) {
  if (input_shape.size() != 4 || dy.shape() != Shape{input_shape[0], input_shape[1]}) {
    throw Error(ErrorCode::ShapeMismatch, "global_avg_pool backward: gradient shape " + shape_string(dy.shape()));
  }
  const std::size_t inner = input_shape[2] * input_shape[3];
  Tensor dx(input_shape);
  for (std::size_t p = 0; p < dy.size(); ++p) {
    const double g = dy[p] / static_cast<double>(inner);
    std::fill_n(dx.data() + p * inner, inner, g);
  }
  return dx;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  const std::size_t n = x.dim(0), d = x.dim(1), u = weight.dim(1);
  if (weight.dim(0) != d || bias.size() != u) {
    throw Error(ErrorCode::ShapeMismatch, "dense: input " + shape_string(x.shape()) + " vs weight " +
                                              shape_string(weight.shape()));
  }
  Tensor y({n, u});
  for (std::size_t s = 0; s < n; ++s) std::copy_n(bias.data(), u, y.data() + s * u);
  gemm_nn(n, u, d, x.data(), d, weight.data(), u, y.data(), u);
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& dy) {
  const std::size_t n = x.dim(0), d = x.dim(1), u = weight.dim(1);
  if (dy.shape() != Shape{n, u}) throw Error(ErrorCode::ShapeMismatch, "dense backward: gradient shape");
  DenseGrads grads{Tensor(x.shape()), Tensor(weight.shape()), Tensor({u})};
  std::vector<double> xt(d * n);
  transpose(x.data(), n, d, xt.data());
  gemm_nn(d, u, n, xt.data(), n, dy.data(), u, grads.weight.data(), u);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < u; ++j) grads.bias[j] += dy[s * u + j];
  }
  std::vector<double> wt(u * d);
  transpose(weight.data(), d, u, wt.data());
  gemm_nn(n, d, u, dy.data(), u, wt.data(), d, grads.input.data(), d);
  return grads;
}

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_channels: no inputs");
  const Tensor& first = inputs.front();
  require_rank(first, 4, "concat_channels");
  std::size_t channels = 0;
  for (const Tensor& t : inputs) {
    require_rank(t, 4, "concat_channels");
    if (t.dim(0) != first.dim(0) || t.dim(2) != first.dim(2) || t.dim(3) != first.dim(3)) {
      throw Error(ErrorCode::ShapeMismatch, "concat_channels: " + shape_string(t.shape()) + " vs " +
                                                shape_string(first.shape()));
    }
    channels += t.dim(1);
  }
  const std::size_t n = first.dim(0), inner = first.dim(2) * first.dim(3);
  Tensor out({n, channels, first.dim(2), first.dim(3)});
  for (std::size_t s = 0; s < n; ++s) {
    double* dst = out.data() + s * channels * inner;
    for (const Tensor& t : inputs) {
      const std::size_t block = t.dim(1) * inner;
      std::copy_n(t.data() + s * block, block, dst);
      dst += block;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> channels) {
  require_rank(t, 4, "split_channels");
  std::size_t total = 0;
  for (auto c : channels) total += c;
  if (total != t.dim(1)) throw Error(ErrorCode::ShapeMismatch, "split_channels: channel counts do not sum");
  const std::size_t n = t.dim(0), inner = t.dim(2) * t.dim(3);
  std::vector<Tensor> parts;
  std::size_t offset = 0;
  for (auto c : channels) {
    Tensor part({n, c, t.dim(2), t.dim(3)});
    for (std::size_t s = 0; s < n; ++s) {
      std::copy_n(t.data() + (s * total + offset) * inner, c * inner, part.data() + s * c * inner);
    }
    parts.push_back(std::move(part));
    offset += c;
  }
  return parts;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y(x.shape());
  // written so that NaN passes through and surfaces as a non-finite loss
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < 0.0 ? 0.0 : x[i];
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require_same_shape(x, dy, "relu backward");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = logits.data() + s * k;
    const double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    for (std::size_t j = 0; j < k; ++j) p[s * k + j] = std::exp(z[j] - mx) / sum;
  }
  return p;
}

namespace {

void require_labels(const Tensor& logits, std::span<const int> labels, std::size_t classes, const char* what) {
  require_rank(logits, 2, what);
  if (logits.dim(0) != labels.size() || logits.dim(1) != classes) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": logits " + shape_string(logits.shape()) +
                                              " vs " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyDataset, std::string(what) + ": empty batch");
}

}  // namespace

double sigmoid_bce_loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits) {
  require_labels(logits, labels, 1, "sigmoid_bce_loss");
  const double n = static_cast<double>(labels.size());
  if (dlogits) *dlogits = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const double z = logits[s];
    const double y = labels[s] ? 1.0 : 0.0;
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (dlogits) (*dlogits)[s] = (sigmoid(z) - y) / n;
  }
  return total / n;
}

double softmax_ce_loss(const Tensor& logits, std::span<const int> labels, Tensor* dlogits) {
  require_labels(logits, labels, 2, "softmax_ce_loss");
  const double n = static_cast<double>(labels.size());
  const Tensor p = softmax_rows(logits);
  if (dlogits) *dlogits = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const std::size_t y = labels[s] ? 1 : 0;
    const double* z = logits.data() + 2 * s;
    const double mx = std::max(z[0], z[1]);
    const double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
    total += lse - z[y];
    if (dlogits) {
      for (std::size_t j = 0; j < 2; ++j) (*dlogits)[2 * s + j] = (p[2 * s + j] - (j == y ? 1.0 : 0.0)) / n;
    }
  }
  return total / n;
}

}  // namespace tender::nn
