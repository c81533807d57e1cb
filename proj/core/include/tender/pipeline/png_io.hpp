#pragma once

#include <filesystem>

#include "tender/image.hpp"

namespace tender::pipeline {

// Any PNG color type; color input is converted with image::to_grayscale.
// Throws FileUnreadable.
image::GrayImage read_png_gray(const std::filesystem::path& path);
image::ColorImage read_png_color(const std::filesystem::path& path);

// Written atomically. Throws IoError.
void write_png(const std::filesystem::path& path, const image::GrayImage& img);
void write_png(const std::filesystem::path& path, const image::ColorImage& img);

}  // namespace tender::pipeline
