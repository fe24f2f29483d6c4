#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/jsonl.hpp"

namespace tikzkit {

enum class SourceKind { arxiv, github, texse, synthetic, curated };
enum class LicenseClass { permissive_cc, nonexclusive_dist, unknown };
enum class EnvKind { tikzpicture, tikzcd, circuitikz };

std::string_view to_string(SourceKind k);
std::string_view to_string(LicenseClass l);
std::string_view to_string(EnvKind e);
SourceKind parse_source_kind(std::string_view s);
LicenseClass parse_license(std::string_view s);
EnvKind parse_env_kind(std::string_view s);

struct SourceDocument {
  std::string id;
  SourceKind source_kind = SourceKind::arxiv;
  std::string raw_text;
  std::optional<std::string> date;  // ISO-8601 yyyy-mm-dd
  LicenseClass license = LicenseClass::unknown;
  std::string origin_key;

  // Throws InputError when raw_text or origin_key is empty.
  void validate() const;
};

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct ExtractedSnippet {
  std::string doc_id;
  EnvKind env_kind = EnvKind::tikzpicture;
  std::string body;  // \begin{...} through \end{...}, unstripped
  ByteSpan byte_span;
  std::size_t sibling_index = 0;
};

struct ExtractionDiagnostic {
  std::string doc_id;
  std::size_t offset = 0;
  std::string message;
};

struct ExtractionResult {
  std::vector<ExtractedSnippet> snippets;
  std::vector<ExtractionDiagnostic> diagnostics;
};

// Finds every outermost tikzpicture / tikzcd / circuitikz environment in
// document order. Unbalanced regions are skipped and reported; the scan
// never aborts. Comments and verbatim-like regions are not searched.
// Malformed UTF-8 is replaced with U+FFFD first; spans index that text,
// which equals raw_text whenever raw_text is valid UTF-8.
ExtractionResult extract_environments(const SourceDocument& doc);

// Removes every unescaped `%` up to (not including) the end of its line.
// Verbatim-like regions are left alone.
std::string strip_comments(std::string_view body);

// True when the (comment-stripped) body pulls in external files.
bool has_external_refs(std::string_view body);

// True when body starts with \begin{target} whose matching \end{target}
// closes the text, and every environment inside nests properly.
bool is_balanced_environment(std::string_view body);

// Loads every .tex/.pgf file under root. Document ids are root-relative
// paths; the origin key is the first path component (repository or paper
// directory), or the file stem for top-level files.
std::vector<SourceDocument> load_document_tree(const std::filesystem::path& root,
                                               SourceKind kind,
                                               LicenseClass license);

// One SourceDocument per line. Malformed lines are diagnostics unless strict.
std::vector<SourceDocument> read_document_manifest(
    const std::filesystem::path& path, bool strict,
    std::vector<LineDiagnostic>* diagnostics = nullptr);

Json to_json(const SourceDocument& doc);
SourceDocument source_document_from_json(const Json& j);
Json to_json(const ExtractedSnippet& s);
ExtractedSnippet snippet_from_json(const Json& j);
Json to_json(const ExtractionDiagnostic& d);

}  // namespace tikzkit
