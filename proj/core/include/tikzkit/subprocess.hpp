#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tikzkit {

struct ProcessResult {
  int exit_code = -1;     // -1 when killed or not started
  bool timed_out = false;
  bool not_found = false;  // executable could not be located / executed
  std::string output;      // merged stdout+stderr, tail-truncated
  std::chrono::milliseconds duration{0};
};

struct ProcessOptions {
  std::filesystem::path cwd;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_output_bytes = 64 * 1024;
  std::vector<std::pair<std::string, std::string>> extra_env;
};

// Runs argv with stdin from /dev/null in its own process group. On timeout
// the whole group is killed. Throws InfrastructureError if the process
// cannot be spawned for reasons other than a missing executable.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options);

// Keeps the last max_bytes of text, prefixed with a marker when cut.
std::string tail_truncate(std::string text, std::size_t max_bytes);

// Locates an executable on PATH (or checks an explicit path).
bool executable_available(const std::string& program);

// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::filesystem::path& parent, const std::string& prefix = "tikzkit-");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace tikzkit
