#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tikzkit {

using Json = nlohmann::json;

struct LineDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct JsonlReadResult {
  std::vector<Json> rows;
  std::vector<LineDiagnostic> diagnostics;
};

// Reads one JSON value per non-blank line. In strict mode the first
// malformed line throws InputError naming the line; otherwise it is
// recorded as a diagnostic and reading continues.
JsonlReadResult read_jsonl(const std::filesystem::path& path, bool strict = true);
JsonlReadResult parse_jsonl(const std::string& text, bool strict = true);

// Canonical line form: compact dump, keys in sorted order.
std::string to_jsonl_line(const Json& row);

// Writes via a sibling temporary file and rename so readers never observe a
// partially written file.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tikzkit
