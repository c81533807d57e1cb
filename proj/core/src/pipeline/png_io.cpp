#include "tender/pipeline/png_io.hpp"

#include <png.h>

#include <cstring>

#include "tender/fsutil.hpp"

namespace tender::pipeline {

namespace {

std::vector<std::uint8_t> decode(const std::filesystem::path& path, png_uint_32 format, int& w, int& h) {
  const std::string bytes = read_file(path);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::FileUnreadable, path.string() + ": " + png.message);
  }
  png.format = format;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(png));
  const png_color white{255, 255, 255};
  // Transparent areas composite onto white paper.
  if (!png_image_finish_read(&png, &white, data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw Error(ErrorCode::FileUnreadable, path.string() + ": " + msg);
  }
  w = static_cast<int>(png.width);
  h = static_cast<int>(png.height);
  if (w < 1 || h < 1) throw Error(ErrorCode::FileUnreadable, path.string() + ": empty image");
  return data;
}

void encode(const std::filesystem::path& path, png_uint_32 format, int w, int h, const std::uint8_t* data) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(png, size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::IoError, path.string() + ": " + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, data, 0, nullptr)) {
    throw Error(ErrorCode::IoError, path.string() + ": " + png.message);
  }
  out.resize(size);
  write_file_atomic(path, out);
}

}  // namespace

image::GrayImage read_png_gray(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  auto rgb = decode(path, PNG_FORMAT_RGB, w, h);
  return image::to_grayscale(image::ColorImage(w, h, std::move(rgb)));
}

image::ColorImage read_png_color(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  auto rgb = decode(path, PNG_FORMAT_RGB, w, h);
  return image::ColorImage(w, h, std::move(rgb));
}

void write_png(const std::filesystem::path& path, const image::GrayImage& img) {
  encode(path, PNG_FORMAT_GRAY, img.width(), img.height(), img.data().data());
}

void write_png(const std::filesystem::path& path, const image::ColorImage& img) {
  encode(path, PNG_FORMAT_RGB, img.width(), img.height(), img.data().data());
}

}  // namespace tender::pipeline
