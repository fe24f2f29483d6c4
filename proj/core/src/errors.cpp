#include "tikzkit/errors.hpp"

#include <utility>

namespace tikzkit {
namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "invalid configuration";
  for (const auto& s : v) {
    out += "\n  - ";
    out += s;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

}  // namespace tikzkit
