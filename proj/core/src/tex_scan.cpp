#include "tex_scan.hpp"

#include <array>
#include <cctype>

namespace tikzkit::detail {
namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Parses `{name}` (optionally preceded by spaces/tabs) starting at i.
// Returns the offset past '}' or npos.
std::size_t read_env_name(std::string_view text, std::size_t i, std::string& name) {
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  if (i >= text.size() || text[i] != '{') return std::string_view::npos;
  const std::size_t close = text.find('}', i + 1);
  if (close == std::string_view::npos) return std::string_view::npos;
  const auto inner = text.substr(i + 1, close - i - 1);
  if (inner.empty() || inner.find_first_of("{\\\n") != std::string_view::npos) {
    return std::string_view::npos;
  }
  name.assign(inner);
  return close + 1;
}

}  // namespace

bool is_verbatim_env(std::string_view name) {
  static constexpr std::array<std::string_view, 6> kVerbatim = {
      "verbatim", "verbatim*", "lstlisting", "minted", "Verbatim", "comment"};
  for (auto v : kVerbatim) {
    if (v == name) return true;
  }
  return false;
}

ScanResult scan_tex(std::string_view text) {
  ScanResult out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (c == '%') {
      std::size_t eol = text.find('\n', i);
      if (eol == std::string_view::npos) eol = n;
      out.comments.push_back({i, eol});
      i = eol;
      continue;
    }
    if (c != '\\') {
      ++i;
      continue;
    }
    if (i + 1 >= n) break;
    if (!is_letter(text[i + 1])) {
      i += 2;  // control symbol: \%, \\, \{ ...
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && is_letter(text[j])) ++j;
    const auto cmd = text.substr(i + 1, j - i - 1);

    if (cmd == "begin" || cmd == "end") {
      std::string name;
      const std::size_t after = read_env_name(text, j, name);
      if (after == std::string_view::npos) {
        i = j;
        continue;
      }
      const bool is_begin = cmd == "begin";
      out.events.push_back({is_begin, name, i, after});
      if (is_begin && is_verbatim_env(name)) {
        const std::string closer = "\\end{" + name + "}";
        const std::size_t close = text.find(closer, after);
        if (close == std::string_view::npos) {
          out.unterminated_verbatim = true;
          return out;
        }
        out.events.push_back({false, name, close, close + closer.size()});
        i = close + closer.size();
      } else {
        i = after;
      }
      continue;
    }

    if (cmd == "verb" || cmd == "lstinline") {
      std::size_t k = j;
      if (k < n && text[k] == '*') ++k;
      if (cmd == "lstinline" && k < n && text[k] == '[') {
        const std::size_t close = text.find(']', k);
        if (close == std::string_view::npos) {
          i = j;
          continue;
        }
        k = close + 1;
      }
      if (k < n && text[k] != '\n' && !is_letter(text[k])) {
        const char delim = text[k] == '{' ? '}' : text[k];
        std::size_t close = k + 1;
        while (close < n && text[close] != delim && text[close] != '\n') ++close;
        if (close < n && text[close] == delim) {
          i = close + 1;
          continue;
        }
      }
      i = j;
      continue;
    }
    i = j;
  }
  return out;
}

}  // namespace tikzkit::detail
