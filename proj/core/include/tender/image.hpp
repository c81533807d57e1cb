#pragma once

// In-memory raster primitives: luminance conversion, binarization, square
// padding, bilinear resampling and cropping. File I/O lives in
// tender/pipeline/png_io.hpp.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tender/error.hpp"

namespace tender::image {

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  long long area() const { return static_cast<long long>(w) * h; }

  bool operator==(const BBox&) const = default;
};

// Intersection over union of two boxes; 0 when either is empty.
double iou(const BBox& a, const BBox& b);

// `inner` lies strictly inside `outer` (no shared edge).
bool strictly_inside(const BBox& inner, const BBox& outer);

// Row-major, channel-interleaved 8-bit raster.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(check_dim(width)) * check_dim(height) * Channels, fill) {}
  Raster(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 ||
        data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw Error(ErrorCode::ShapeMismatch, "raster data length does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  static int check_dim(int d) {
    if (d < 1) throw Error(ErrorCode::ShapeMismatch, "raster dimensions must be >= 1");
    return d;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using GrayImage = Raster<1>;
using ColorImage = Raster<3>;  // R, G, B

class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

  std::size_t count_foreground() const;

  bool operator==(const BinaryImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// nullopt selects Otsu's threshold.
using Threshold = std::optional<std::uint8_t>;
inline constexpr Threshold kAutoThreshold = std::nullopt;

GrayImage to_grayscale(const ColorImage& img);

// Otsu: threshold t maximizing between-class variance of {<= t} vs {> t};
// ties resolve to the lowest t.
std::uint8_t otsu_threshold(const GrayImage& img);

// foreground = (pixel > thresh) XOR invert
BinaryImage threshold_binary(const GrayImage& img, Threshold thresh, bool invert);

// Original at offset (0,0) on a max(w,h) square canvas.
GrayImage pad_to_square(const GrayImage& img, std::uint8_t fill = 0);
ColorImage pad_to_square(const ColorImage& img, std::uint8_t fill = 0);

// Half-pixel-centre bilinear resampling, edge clamped, rounded half up.
GrayImage resize_bilinear(const GrayImage& img, int target_w, int target_h);
ColorImage resize_bilinear(const ColorImage& img, int target_w, int target_h);

GrayImage crop(const GrayImage& img, const BBox& box);
ColorImage crop(const ColorImage& img, const BBox& box);

}  // namespace tender::image
