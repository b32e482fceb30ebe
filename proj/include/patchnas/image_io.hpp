#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "patchnas/tensor.hpp"

namespace patchnas {

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct ImageSize {
  int height = 0;
  int width = 0;
};

// PNG files of any color type. RGB reads give a 3 x H x W tensor in [0, 1];
// gray reads convert color to luminance. Errors throw DataError.
FeatureTensor read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
ImageSize read_png_size(const std::filesystem::path& path);

// 8-bit output; RGB values are clamped to [0, 1] and rounded.
void write_png_rgb(const std::filesystem::path& path, const FeatureTensor& image);
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);

}  // namespace patchnas
