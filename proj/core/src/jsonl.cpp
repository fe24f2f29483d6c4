#include "tikzkit/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "tikzkit/errors.hpp"

namespace tikzkit {

JsonlReadResult parse_jsonl(const std::string& text, bool strict) {
  JsonlReadResult result;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      result.rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      if (strict) {
        throw InputError("line " + std::to_string(lineno) + ": " + e.what());
      }
      result.diagnostics.push_back({lineno, e.what()});
    }
  }
  return result;
}

JsonlReadResult read_jsonl(const std::filesystem::path& path, bool strict) {
  return parse_jsonl(read_text_file(path), strict);
}

std::string to_jsonl_line(const Json& row) {
  return row.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw InfrastructureError("cannot create " + path.parent_path().string());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InfrastructureError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw InfrastructureError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InfrastructureError("rename " + tmp.string() + ": " + ec.message());
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += to_jsonl_line(row);
    text += '\n';
  }
  write_text_file(path, text);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tikzkit
