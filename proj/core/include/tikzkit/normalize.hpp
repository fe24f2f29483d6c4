#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tikzkit/corpus_extract.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

inline constexpr std::string_view kStandaloneClassLine = "\\documentclass[tikz]{standalone}";
inline constexpr std::string_view kBeginDocument = "\\begin{document}";
inline constexpr std::string_view kEndDocument = "\\end{document}";

// Where a normalized program came from.
struct Provenance {
  std::string doc_id;
  SourceKind source_kind = SourceKind::arxiv;
  std::string origin_key;
  LicenseClass license = LicenseClass::unknown;
  std::optional<std::string> date;
  EnvKind env_kind = EnvKind::tikzpicture;
  std::size_t sibling_index = 0;
};

struct NormalizedProgram {
  std::string record_id;
  std::string code;                   // full standalone document
  std::string body;                   // the wrapped environment
  std::vector<std::string> packages;  // preamble lines, in emitted order
  std::size_t char_count = 0;         // code points in code
  std::size_t body_char_count = 0;    // code points in body
  std::string content_hash;           // sha256 hex of code
  Provenance provenance;
};

struct PackageRule {
  std::string pattern;
  std::string package_directive;
  int priority = 0;
};

// Validated, compiled rule table. Construction is the only place a bad
// pattern can surface (ConfigError listing every bad rule).
class PackageRuleSet {
 public:
  explicit PackageRuleSet(std::vector<PackageRule> rules);

  static PackageRuleSet from_json(const Json& j);
  static PackageRuleSet load(const std::filesystem::path& path);
  static PackageRuleSet defaults();

  const std::vector<PackageRule>& rules() const { return rules_; }

  // Priority-ordered (then lexicographic), duplicate-free preamble lines
  // whose pattern matches body.
  std::vector<std::string> detect(std::string_view body) const;

 private:
  std::vector<PackageRule> rules_;
  std::vector<std::regex> compiled_;
};

// The JSON text of the shipped default rule table.
std::string_view default_package_rules_json();

std::vector<std::string> detect_packages(std::string_view body, const PackageRuleSet& rules);

// class line + preamble lines + \begin{document} + body + \end{document},
// newline separated, with a trailing newline.
NormalizedProgram wrap_standalone(std::string_view snippet_body,
                                  const std::vector<std::string>& preamble);

inline constexpr std::size_t kMinBodyChars = 100;
inline constexpr std::size_t kMaxBodyChars = 4000;

// Keep iff min <= body length <= max (length of the environment body, not
// the wrapper).
bool length_filter(const NormalizedProgram& p, std::size_t min = kMinBodyChars,
                   std::size_t max = kMaxBodyChars);

// Exact deduplication on content_hash. Safe for concurrent use; each hash
// is admitted at most once.
class Deduplicator {
 public:
  bool admit(const std::string& content_hash);
  std::size_t dropped() const;
  std::size_t seen() const;

 private:
  mutable std::mutex mu_;
  std::unordered_set<std::string> seen_;
  std::size_t dropped_ = 0;
};

struct DedupResult {
  std::vector<NormalizedProgram> kept;
  std::size_t dropped = 0;
};

DedupResult dedup(std::vector<NormalizedProgram> programs);

// Full per-snippet normalization: strip comments, drop external-file
// users (nullopt), detect packages, wrap.
std::optional<NormalizedProgram> normalize_snippet(const ExtractedSnippet& snippet,
                                                   const PackageRuleSet& rules);

Json to_json(const NormalizedProgram& p);
NormalizedProgram normalized_program_from_json(const Json& j);
Json to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);

}  // namespace tikzkit
