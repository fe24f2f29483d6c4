#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tikzkit {

// 8-bit RGBA image, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, fill) {}

  std::uint8_t* pixel(int x, int y) { return &rgba[(static_cast<std::size_t>(y) * width + x) * 4]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgba[(static_cast<std::size_t>(y) * width + x) * 4];
  }
};

// Throws InputError when the file is missing, not a PNG, or truncated.
Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& image);

// True when some pixel, composited over white, differs from white by more
// than epsilon in any channel.
bool has_ink(const Raster& image, int epsilon = 8);

// Luminance in [0,1] of the pixel composited over white.
double luminance(const Raster& image, int x, int y);

}  // namespace tikzkit
