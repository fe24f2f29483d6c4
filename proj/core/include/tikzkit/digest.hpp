#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tikzkit {

// Lowercase hex SHA-256 of the exact byte sequence.
std::string sha256_hex(std::string_view bytes);

// Of a file's bytes. InputError when it cannot be read.
std::string file_sha256(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
// Throws InputError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace tikzkit
