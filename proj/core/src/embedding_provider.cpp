#include "tikzkit/embedding_provider.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>

#include <httplib.h>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/raster.hpp"
#include "tikzkit/subprocess.hpp"

namespace tikzkit {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + k])) << (8 * k);
  return v;
}

}  // namespace

std::string encode_embedding_matrix(const PatchEmbeddingSet& set) {
  std::string out(kEmbeddingMagic);
  put_u32(out, static_cast<std::uint32_t>(set.count()));
  put_u32(out, static_cast<std::uint32_t>(set.dim()));
  out.reserve(out.size() + set.values().size() * 4);
  for (double v : set.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

PatchEmbeddingSet decode_embedding_matrix(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kEmbeddingMagic) {
    throw InputError("not an embedding matrix (bad header)");
  }
  const std::size_t rows = get_u32(bytes, 8);
  const std::size_t cols = get_u32(bytes, 12);
  if (bytes.size() != 16 + rows * cols * 4) {
    throw InputError("embedding matrix size mismatch: header says " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  std::vector<double> values(rows * cols);
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * k));
  }
  return PatchEmbeddingSet(rows, cols, std::move(values));
}

void write_embedding_matrix(const std::filesystem::path& path, const PatchEmbeddingSet& set) {
  write_text_file(path, encode_embedding_matrix(set));
}

PatchEmbeddingSet read_embedding_matrix(const std::filesystem::path& path) {
  return decode_embedding_matrix(read_text_file(path));
}

FileExchangeProvider::FileExchangeProvider(std::vector<std::string> command, double timeout_s,
                                           std::filesystem::path work_root)
    : command_(std::move(command)), timeout_s_(timeout_s), work_root_(std::move(work_root)) {
  if (command_.empty()) throw ConfigError("embedding provider command is empty");
  if (!(timeout_s_ > 0)) throw ConfigError("embedding provider timeout must be > 0");
}

PatchEmbeddingSet FileExchangeProvider::embed(const std::filesystem::path& image) {
  TempDir work(work_root_, "tikzkit-embed-");
  const auto output = work.path() / "embedding.bin";
  std::vector<std::string> argv = command_;
  for (auto& a : argv) {
    for (const auto& [key, value] : {std::pair<std::string, std::string>{"{image}", std::filesystem::absolute(image).string()},
                                     {"{output}", output.string()}}) {
      for (auto pos = a.find(key); pos != std::string::npos; pos = a.find(key, pos + value.size())) {
        a.replace(pos, key.size(), value);
      }
    }
  }
  ProcessOptions opts;
  opts.cwd = work.path();
  opts.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s_ * 1000));
  const auto res = run_process(argv, opts);
  if (res.not_found) throw EnvironmentError("embedding provider not found: " + command_[0]);
  if (res.timed_out) throw InfrastructureError("embedding provider timed out");
  if (res.exit_code != 0) {
    throw InfrastructureError("embedding provider exited with code " + std::to_string(res.exit_code) +
                              ": " + res.output);
  }
  try {
    return read_embedding_matrix(output);
  } catch (const Error& e) {
    throw InfrastructureError(std::string("embedding provider output unusable: ") + e.what());
  }
}

std::string FileExchangeProvider::identity() const {
  std::string id = "file-exchange:";
  for (std::size_t i = 0; i < command_.size(); ++i) id += (i ? " " : "") + command_[i];
  return id;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, double timeout_s)
    : url_(std::move(url)), timeout_s_(timeout_s) {
  if (url_.rfind("http://", 0) != 0 && url_.rfind("https://", 0) != 0) {
    throw ConfigError("embedding provider url must start with http:// or https://");
  }
}

PatchEmbeddingSet HttpEmbeddingProvider::embed(const std::filesystem::path& image) {
  const auto scheme_end = url_.find("://") + 3;
  const auto path_start = url_.find('/', scheme_end);
  const std::string origin = url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);
  httplib::Client client(origin);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s_ * 1000));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  const Json body{{"media_type", "image/png"},
                  {"image_base64", base64_encode(std::string_view(read_text_file(image)))}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw InfrastructureError("embedding endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw InfrastructureError("embedding endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto parsed = Json::parse(res->body);
    const auto bytes = base64_decode(parsed.at("matrix_base64").get<std::string>());
    return decode_embedding_matrix(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const std::exception& e) {
    throw InfrastructureError(std::string("embedding endpoint response unusable: ") + e.what());
  }
}

RasterPatchProvider::RasterPatchProvider(int grid) : grid_(grid) {
  if (grid_ < 1) throw ConfigError("raster patch grid must be >= 1");
}

std::string RasterPatchProvider::identity() const {
  return "raster-patch/v1 grid=" + std::to_string(grid_);
}

PatchEmbeddingSet RasterPatchProvider::embed(const std::filesystem::path& image) {
  try {
    return embed_raster(read_png(image));
  } catch (const InputError& e) {
    throw InfrastructureError(std::string("cannot embed image: ") + e.what());
  }
}

PatchEmbeddingSet RasterPatchProvider::embed_raster(const Raster& image) const {
  if (image.width <= 0 || image.height <= 0) throw InputError("empty raster");
  const int cells = grid_ * 2;
  constexpr std::size_t kDim = 1 + 4 * 3;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(grid_ * grid_) * kDim);
  auto cell_bounds = [](int idx, int cells_n, int extent) {
    const int lo = static_cast<int>(static_cast<long long>(idx) * extent / cells_n);
    int hi = static_cast<int>(static_cast<long long>(idx + 1) * extent / cells_n);
    if (hi <= lo) hi = std::min(extent, lo + 1);
    return std::pair{lo, hi};
  };
  for (int py = 0; py < grid_; ++py) {
    for (int px = 0; px < grid_; ++px) {
      values.push_back(1.0);
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const auto [x0, x1] = cell_bounds(px * 2 + sx, cells, image.width);
          const auto [y0, y1] = cell_bounds(py * 2 + sy, cells, image.height);
          double ink[3] = {0, 0, 0};
          for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
              const auto* p = image.pixel(x, y);
              const double alpha = p[3] / 255.0;
              for (int c = 0; c < 3; ++c) {
                const double over_white = alpha * p[c] / 255.0 + (1.0 - alpha);
                ink[c] += 1.0 - over_white;
              }
            }
          }
          const double area = static_cast<double>((x1 - x0) * (y1 - y0));
          for (double v : ink) values.push_back(area > 0 ? v / area : 0.0);
        }
      }
    }
  }
  return PatchEmbeddingSet(static_cast<std::size_t>(grid_ * grid_), kDim, std::move(values));
}

}  // namespace tikzkit
