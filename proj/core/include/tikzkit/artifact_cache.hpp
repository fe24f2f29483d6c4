#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace tikzkit {

// Content-addressed file store with a two-level hex fan-out:
//   <root>/<h[0:2]>/<h[2:4]>/<h><suffix>
// Reads are lock-free; writes for the same key are serialized and land via
// rename, so a reader sees either nothing or the complete file.
class ArtifactCache {
 public:
  explicit ArtifactCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(std::string_view hash, std::string_view suffix) const;

  // Counts a hit or a miss.
  std::optional<std::filesystem::path> find(std::string_view hash, std::string_view suffix);

  std::filesystem::path put_file(std::string_view hash, std::string_view suffix,
                                 const std::filesystem::path& source);
  std::filesystem::path put_bytes(std::string_view hash, std::string_view suffix,
                                  std::string_view bytes);

  // Serializes writers for one key across threads.
  std::mutex& key_mutex(std::string_view hash);

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::filesystem::path root_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::mutex map_mu_;
  std::unordered_map<std::string, std::mutex> key_mutexes_;
};

}  // namespace tikzkit
