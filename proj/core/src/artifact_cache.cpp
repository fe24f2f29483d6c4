#include "tikzkit/artifact_cache.hpp"

#include <fstream>
#include <random>
#include <thread>

#include "tikzkit/errors.hpp"

namespace tikzkit {
namespace {

std::string temp_suffix() {
  static std::atomic<unsigned> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  return ".part-" + std::to_string(tid % 100000) + "-" + std::to_string(counter++);
}

void ensure_hash(std::string_view hash) {
  if (hash.size() < 4) throw InputError("artifact key too short: '" + std::string(hash) + "'");
  for (char c : hash) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      throw InputError("artifact key is not lowercase hex: '" + std::string(hash) + "'");
    }
  }
}

}  // namespace

ArtifactCache::ArtifactCache(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw InfrastructureError("cannot create cache root " + root_.string());
}

std::filesystem::path ArtifactCache::path_for(std::string_view hash,
                                              std::string_view suffix) const {
  ensure_hash(hash);
  return root_ / std::string(hash.substr(0, 2)) / std::string(hash.substr(2, 2)) /
         (std::string(hash) + std::string(suffix));
}

std::optional<std::filesystem::path> ArtifactCache::find(std::string_view hash,
                                                         std::string_view suffix) {
  auto p = path_for(hash, suffix);
  std::error_code ec;
  if (std::filesystem::is_regular_file(p, ec)) {
    ++hits_;
    return p;
  }
  ++misses_;
  return std::nullopt;
}

std::filesystem::path ArtifactCache::put_file(std::string_view hash, std::string_view suffix,
                                              const std::filesystem::path& source) {
  const auto dest = path_for(hash, suffix);
  std::error_code ec;
  std::filesystem::create_directories(dest.parent_path(), ec);
  auto tmp = dest;
  tmp += temp_suffix();
  std::filesystem::copy_file(source, tmp, std::filesystem::copy_options::overwrite_existing, ec);
  if (ec) throw InfrastructureError("cache copy " + source.string() + ": " + ec.message());
  std::filesystem::rename(tmp, dest, ec);
  if (ec) throw InfrastructureError("cache rename " + dest.string() + ": " + ec.message());
  return dest;
}

std::filesystem::path ArtifactCache::put_bytes(std::string_view hash, std::string_view suffix,
                                               std::string_view bytes) {
  const auto dest = path_for(hash, suffix);
  std::error_code ec;
  std::filesystem::create_directories(dest.parent_path(), ec);
  auto tmp = dest;
  tmp += temp_suffix();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InfrastructureError("cache write " + tmp.string());
  }
  std::filesystem::rename(tmp, dest, ec);
  if (ec) throw InfrastructureError("cache rename " + dest.string() + ": " + ec.message());
  return dest;
}

std::mutex& ArtifactCache::key_mutex(std::string_view hash) {
  std::lock_guard lock(map_mu_);
  return key_mutexes_[std::string(hash)];
}

}  // namespace tikzkit
