#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/raster.hpp"
#include "tikzkit/reward.hpp"

namespace tikzkit {

// Binary patch-embedding matrix: a 16-byte header (8-byte magic
// "TKZEMB\x01\x00", u32 rows, u32 cols, little-endian) followed by
// rows*cols little-endian float32 values, row-major.
inline constexpr std::string_view kEmbeddingMagic{"TKZEMB\x01\x00", 8};

std::string encode_embedding_matrix(const PatchEmbeddingSet& set);
PatchEmbeddingSet decode_embedding_matrix(std::string_view bytes);
void write_embedding_matrix(const std::filesystem::path& path, const PatchEmbeddingSet& set);
PatchEmbeddingSet read_embedding_matrix(const std::filesystem::path& path);

// Runs an external program per image. Placeholders: {image} (input PNG
// path) and {output} (matrix file the program must write).
class FileExchangeProvider : public EmbeddingProvider {
 public:
  FileExchangeProvider(std::vector<std::string> command, double timeout_s = 120.0,
                       std::filesystem::path work_root = std::filesystem::temp_directory_path());
  PatchEmbeddingSet embed(const std::filesystem::path& image) override;
  std::string identity() const override;

 private:
  std::vector<std::string> command_;
  double timeout_s_;
  std::filesystem::path work_root_;
};

// POSTs {"media_type", "image_base64"} as JSON to url; expects
// {"matrix_base64": <base64 of the binary matrix format>}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string url, double timeout_s = 120.0);
  PatchEmbeddingSet embed(const std::filesystem::path& image) override;
  std::string identity() const override { return "http:" + url_; }

 private:
  std::string url_;
  double timeout_s_;
};

// Built-in deterministic features for offline runs: the image is cut into
// grid x grid patches; each patch becomes 1 (bias) + per-channel mean ink
// over its 2x2 sub-cells. Not a learned encoder.
class RasterPatchProvider : public EmbeddingProvider {
 public:
  explicit RasterPatchProvider(int grid = 4);
  PatchEmbeddingSet embed(const std::filesystem::path& image) override;
  PatchEmbeddingSet embed_raster(const Raster& image) const;
  std::string identity() const override;

 private:
  int grid_;
};

}  // namespace tikzkit
