#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace tikzkit {

// Replaces every malformed UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);
bool is_valid_utf8(std::string_view bytes);

// Number of code points; assumes valid UTF-8.
std::size_t utf8_length(std::string_view text);

std::string_view trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace tikzkit
