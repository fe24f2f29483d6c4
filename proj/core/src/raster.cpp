#include "tikzkit/raster.hpp"

#include <png.h>

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "tikzkit/errors.hpp"

namespace tikzkit {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t over_white(std::uint8_t c, std::uint8_t a) {
  return static_cast<std::uint8_t>((c * a + 255 * (255 - a) + 127) / 255);
}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    std::string why = img.message;
    png_image_free(&img);
    throw InputError("cannot decode PNG " + path.string() + ": " + why);
  }
  img.format = PNG_FORMAT_RGBA;
  Raster r;
  r.width = static_cast<int>(img.width);
  r.height = static_cast<int>(img.height);
  r.rgba.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, r.rgba.data(), 0, nullptr)) {
    std::string why = img.message;
    png_image_free(&img);
    throw InputError("corrupted PNG " + path.string() + ": " + why);
  }
  if (r.width <= 0 || r.height <= 0) throw InputError("empty PNG " + path.string());
  return r;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.rgba.data(), 0, nullptr)) {
    std::string why = img.message;
    png_image_free(&img);
    throw InfrastructureError("cannot write PNG " + path.string() + ": " + why);
  }
}

bool has_ink(const Raster& image, int epsilon) {
  for (std::size_t i = 0; i + 3 < image.rgba.size(); i += 4) {
    const auto a = image.rgba[i + 3];
    for (int c = 0; c < 3; ++c) {
      if (255 - over_white(image.rgba[i + c], a) > epsilon) return true;
    }
  }
  return false;
}

double luminance(const Raster& image, int x, int y) {
  const auto* p = image.pixel(x, y);
  const double r = over_white(p[0], p[3]);
  const double g = over_white(p[1], p[3]);
  const double b = over_white(p[2], p[3]);
  return (0.2126 * r + 0.7152 * g + 0.0722 * b) / 255.0;
}

}  // namespace tikzkit
