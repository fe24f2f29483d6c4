#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace tikzkit {

inline constexpr std::string_view kRepairCodeHeader = "Original TikZ Code:\n";
inline constexpr std::string_view kRepairLogHeader = "Compilation Error Log:\n";
inline constexpr std::string_view kEmptyLogPlaceholder = "(no log output)";
inline constexpr std::string_view kLogTruncationMarker = "[... log truncated ...]\n";
inline constexpr std::size_t kDefaultPromptLogBytes = 4000;

// Debug prompt with the code and (tail-truncated) log filled in. An empty
// log is replaced by kEmptyLogPlaceholder.
std::string build_repair_prompt(std::string_view code, std::string_view log,
                                std::size_t max_log_bytes = kDefaultPromptLogBytes);

struct RepairPromptParts {
  std::string code;
  std::string log;
};
// Inverse of build_repair_prompt; nullopt for any other text.
std::optional<RepairPromptParts> parse_repair_prompt(std::string_view prompt);

// The few-shot image description prompt (constant).
const std::string& describe_prompt();

// Model-input prompt for text-to-TikZ generation.
std::string build_generation_prompt(std::string_view figure_description);

}  // namespace tikzkit
