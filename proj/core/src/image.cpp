#include "tender/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace tender::image {

double iou(const BBox& a, const BBox& b) {
  const long long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const long long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

bool strictly_inside(const BBox& inner, const BBox& outer) {
  return inner.x > outer.x && inner.y > outer.y && inner.right() < outer.right() &&
         inner.bottom() < outer.bottom();
}

BinaryImage::BinaryImage(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::ShapeMismatch, "binary image dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryImage::count_foreground() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

GrayImage to_grayscale(const ColorImage& img) {
  GrayImage out(img.width(), img.height());
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::floor(y + 0.5), 0.0, 255.0));
  }
  return out;
}

std::uint8_t otsu_threshold(const GrayImage& img) {
  std::array<double, 256> hist{};
  for (auto v : img.data()) hist[v] += 1.0;
  const double total = static_cast<double>(img.data().size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    double between = 0.0;
    if (w0 > 0.0 && w1 > 0.0) {
      const double mu0 = sum0 / w0;
      const double mu1 = (sum_all - sum0) / w1;
      between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    }
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return static_cast<std::uint8_t>(best_t);
}

BinaryImage threshold_binary(const GrayImage& img, Threshold thresh, bool invert) {
  const int t = thresh ? *thresh : otsu_threshold(img);
  BinaryImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.set(x, y, (img.at(x, y) > t) != invert);
    }
  }
  return out;
}

namespace {

template <int C>
Raster<C> pad_impl(const Raster<C>& img, std::uint8_t fill) {
  const int side = std::max(img.width(), img.height());
  if (side == img.width() && side == img.height()) return img;
  Raster<C> out(side, side, fill);
  const std::size_t row = static_cast<std::size_t>(img.width()) * C;
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(img.data().begin() + static_cast<std::ptrdiff_t>(y * row), row,
                out.data().begin() + static_cast<std::ptrdiff_t>(y) * side * C);
  }
  return out;
}

struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> make_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    taps[d] = {i0, std::min(i0 + 1, src - 1), s - i0};
  }
  return taps;
}

template <int C>
Raster<C> resize_impl(const Raster<C>& img, int tw, int th) {
  if (tw < 1 || th < 1) {
    throw Error(ErrorCode::ShapeMismatch, "resize target must be >= 1x1");
  }
  if (tw == img.width() && th == img.height()) return img;
  const auto xs = make_taps(img.width(), tw);
  const auto ys = make_taps(img.height(), th);
  Raster<C> out(tw, th);
  for (int y = 0; y < th; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < tw; ++x) {
      const Tap& tx = xs[x];
      for (int c = 0; c < C; ++c) {
        const double top = img.at(tx.i0, ty.i0, c) * (1.0 - tx.frac) + img.at(tx.i1, ty.i0, c) * tx.frac;
        const double bot = img.at(tx.i0, ty.i1, c) * (1.0 - tx.frac) + img.at(tx.i1, ty.i1, c) * tx.frac;
        const double v = top * (1.0 - ty.frac) + bot * ty.frac;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

template <int C>
Raster<C> crop_impl(const Raster<C>& img, const BBox& box) {
  if (box.w < 1 || box.h < 1 || box.x < 0 || box.y < 0 || box.right() > img.width() ||
      box.bottom() > img.height()) {
    throw Error(ErrorCode::OutOfBounds,
                "box (" + std::to_string(box.x) + "," + std::to_string(box.y) + "," +
                    std::to_string(box.w) + "," + std::to_string(box.h) + ") exceeds " +
                    std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  Raster<C> out(box.w, box.h);
  const std::size_t row = static_cast<std::size_t>(box.w) * C;
  for (int y = 0; y < box.h; ++y) {
    const auto src = img.data().begin() +
                     static_cast<std::ptrdiff_t>(((static_cast<std::size_t>(box.y + y) * img.width()) + box.x) * C);
    std::copy_n(src, row, out.data().begin() + static_cast<std::ptrdiff_t>(y * row));
  }
  return out;
}

}  // namespace

GrayImage pad_to_square(const GrayImage& img, std::uint8_t fill) { return pad_impl(img, fill); }
ColorImage pad_to_square(const ColorImage& img, std::uint8_t fill) { return pad_impl(img, fill); }

GrayImage resize_bilinear(const GrayImage& img, int tw, int th) { return resize_impl(img, tw, th); }
ColorImage resize_bilinear(const ColorImage& img, int tw, int th) { return resize_impl(img, tw, th); }

GrayImage crop(const GrayImage& img, const BBox& box) { return crop_impl(img, box); }
ColorImage crop(const ColorImage& img, const BBox& box) { return crop_impl(img, box); }

}  // namespace tender::image
