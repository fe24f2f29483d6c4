// Stand-in rasterizer for tests. Usage: fake_raster <in.pdf> <out.png>
// Draws a deterministic picture derived from the fake PDF's digest line.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "tikzkit/raster.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: fake_raster <in.pdf> <out.png>\n";
    return 2;
  }
  std::ifstream in(argv[1], std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string pdf = ss.str();
  if (pdf.rfind("%PDF", 0) != 0 || pdf.find("CORRUPT") != std::string::npos) {
    std::cerr << "Syntax Error: Couldn't read xref table\n";
    return 1;
  }
  constexpr int kSize = 64;
  tikzkit::Raster img(kSize, kSize, 255);
  const auto at = pdf.find("INK ");
  if (at != std::string::npos) {
    const std::string hex = pdf.substr(at + 4, 64);
    auto nib = [&](std::size_t i) { return std::stoi(hex.substr(i % hex.size(), 1), nullptr, 16); };
    for (int r = 0; r < 4; ++r) {
      const int x0 = nib(r * 6) * 3;
      const int y0 = nib(r * 6 + 1) * 3;
      const int w = 6 + nib(r * 6 + 2) * 2;
      const int h = 6 + nib(r * 6 + 3) * 2;
      const auto red = static_cast<std::uint8_t>(nib(r * 6 + 4) * 16);
      const auto blue = static_cast<std::uint8_t>(nib(r * 6 + 5) * 16);
      for (int y = y0; y < std::min(kSize, y0 + h); ++y) {
        for (int x = x0; x < std::min(kSize, x0 + w); ++x) {
          auto* p = img.pixel(x, y);
          p[0] = red;
          p[1] = 40;
          p[2] = blue;
          p[3] = 255;
        }
      }
    }
  }
  tikzkit::write_png(argv[2], img);
  return 0;
}
