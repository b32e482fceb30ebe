#include "patchnas/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "patchnas/error.hpp"

namespace patchnas {

namespace {

struct PngReader {
  png_image image;

  explicit PngReader(const std::filesystem::path& path) {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
      throw DataError("cannot read PNG " + path.string() + ": " + image.message);
    }
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  std::vector<std::uint8_t> finish(png_uint_32 format, const std::filesystem::path& path) {
    image.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
      throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    return buf;
  }
};

void write_png(const std::filesystem::path& path, png_uint_32 format, int h, int w,
               const std::uint8_t* data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

FeatureTensor read_png_rgb(const std::filesystem::path& path) {
  PngReader reader(path);
  const auto buf = reader.finish(PNG_FORMAT_RGB, path);
  const int h = static_cast<int>(reader.image.height);
  const int w = static_cast<int>(reader.image.width);
  FeatureTensor out(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = (static_cast<std::size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<float>(buf[p + c]) / 255.0f;
    }
  }
  return out;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  PngReader reader(path);
  GrayImage out(static_cast<int>(reader.image.height), static_cast<int>(reader.image.width));
  out.pixels = reader.finish(PNG_FORMAT_GRAY, path);
  return out;
}

ImageSize read_png_size(const std::filesystem::path& path) {
  PngReader reader(path);
  return {static_cast<int>(reader.image.height), static_cast<int>(reader.image.width)};
}

void write_png_rgb(const std::filesystem::path& path, const FeatureTensor& image) {
  if (image.channels != 3) throw std::invalid_argument("write_png_rgb: expected 3 channels");
  std::vector<std::uint8_t> buf(image.plane_size() * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = (static_cast<std::size_t>(y) * image.width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        buf[p + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  write_png(path, PNG_FORMAT_RGB, image.height, image.width, buf.data());
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  write_png(path, PNG_FORMAT_GRAY, image.height, image.width, image.pixels.data());
}

}  // namespace patchnas
