#pragma once

// Low-level TeX scanning shared by extraction, comment stripping and the
// balance check. Not installed.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tikzkit::detail {

struct EnvEvent {
  bool is_begin = false;
  std::string name;
  std::size_t start = 0;  // offset of the backslash
  std::size_t end = 0;    // offset just past the closing brace
};

struct Region {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ScanResult {
  std::vector<EnvEvent> events;
  std::vector<Region> comments;
  // Set when a verbatim-like environment runs to end of input.
  bool unterminated_verbatim = false;
};

bool is_verbatim_env(std::string_view name);

// Single left-to-right pass: `%` comments (escape-aware), \verb, and
// verbatim-like environments are skipped; \begin{x}/\end{x} are reported.
ScanResult scan_tex(std::string_view text);

}  // namespace tikzkit::detail
