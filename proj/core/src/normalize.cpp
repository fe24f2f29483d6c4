#include "tikzkit/normalize.hpp"

#include <algorithm>
#include <map>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {

PackageRuleSet::PackageRuleSet(std::vector<PackageRule> rules) : rules_(std::move(rules)) {
  std::vector<std::string> violations;
  if (rules_.empty()) violations.emplace_back("package rule list is empty");
  compiled_.reserve(rules_.size());
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    const std::string where = "rule " + std::to_string(i) + " ('" + r.package_directive + "')";
    if (r.package_directive.empty() ||
        r.package_directive.find('\n') != std::string::npos) {
      violations.push_back(where + ": directive must be a single non-empty line");
    }
    try {
      compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      violations.push_back(where + ": pattern does not compile: " + e.what());
      compiled_.emplace_back();
    }
  }
  if (!violations.empty()) throw ConfigError(std::move(violations));
}

PackageRuleSet PackageRuleSet::from_json(const Json& j) {
  const Json& list = j.is_array() ? j : j.at("rules");
  std::vector<PackageRule> rules;
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& r = list[i];
    if (!r.is_object() || !r.contains("pattern") || !r.contains("directive")) {
      violations.push_back("rule " + std::to_string(i) + ": needs 'pattern' and 'directive'");
      continue;
    }
    rules.push_back({r["pattern"].get<std::string>(), r["directive"].get<std::string>(),
                     r.value("priority", 0)});
  }
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return PackageRuleSet(std::move(rules));
}

PackageRuleSet PackageRuleSet::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

PackageRuleSet PackageRuleSet::defaults() {
  static const PackageRuleSet kDefaults = from_json(Json::parse(default_package_rules_json()));
  return kDefaults;
}

std::vector<std::string> PackageRuleSet::detect(std::string_view body) const {
  // directive -> lowest priority among matching rules
  std::map<std::string, int> hits;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!std::regex_search(body.begin(), body.end(), compiled_[i])) continue;
    auto [it, inserted] = hits.emplace(rules_[i].package_directive, rules_[i].priority);
    if (!inserted) it->second = std::min(it->second, rules_[i].priority);
  }
  std::vector<std::pair<int, std::string>> ordered;
  ordered.reserve(hits.size());
  for (auto& [directive, priority] : hits) ordered.emplace_back(priority, directive);
  std::sort(ordered.begin(), ordered.end());
  std::vector<std::string> out;
  out.reserve(ordered.size());
  for (auto& [_, directive] : ordered) out.push_back(std::move(directive));
  return out;
}

std::vector<std::string> detect_packages(std::string_view body, const PackageRuleSet& rules) {
  return rules.detect(body);
}

NormalizedProgram wrap_standalone(std::string_view snippet_body,
                                  const std::vector<std::string>& preamble) {
  NormalizedProgram p;
  p.body = std::string(snippet_body);
  p.packages = preamble;
  std::string code;
  code.reserve(snippet_body.size() + 128);
  code += kStandaloneClassLine;
  code += '\n';
  for (const auto& line : preamble) {
    code += line;
    code += '\n';
  }
  code += kBeginDocument;
  code += '\n';
  code += snippet_body;
  code += '\n';
  code += kEndDocument;
  code += '\n';
  p.code = std::move(code);
  p.char_count = utf8_length(p.code);
  p.body_char_count = utf8_length(p.body);
  p.content_hash = sha256_hex(p.code);
  return p;
}

bool length_filter(const NormalizedProgram& p, std::size_t min, std::size_t max) {
  return p.body_char_count >= min && p.body_char_count <= max;
}

bool Deduplicator::admit(const std::string& content_hash) {
  std::lock_guard lock(mu_);
  if (seen_.insert(content_hash).second) return true;
  ++dropped_;
  return false;
}

std::size_t Deduplicator::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t Deduplicator::seen() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

DedupResult dedup(std::vector<NormalizedProgram> programs) {
  Deduplicator d;
  DedupResult out;
  for (auto& p : programs) {
    if (d.admit(p.content_hash)) out.kept.push_back(std::move(p));
  }
  out.dropped = d.dropped();
  return out;
}

std::optional<NormalizedProgram> normalize_snippet(const ExtractedSnippet& snippet,
                                                   const PackageRuleSet& rules) {
  std::string body = strip_comments(snippet.body);
  if (has_external_refs(body)) return std::nullopt;
  // strip_comments keeps newlines, so original and stripped lines pair up.
  // Lines that only held a comment are dropped; others keep their layout.
  std::string compact;
  compact.reserve(body.size());
  std::string_view before = snippet.body;
  std::string_view after = body;
  bool first = true;
  while (true) {
    const auto eb = before.find('\n');
    const auto ea = after.find('\n');
    auto orig = before.substr(0, eb);
    auto line = after.substr(0, ea);
    const bool had_comment = orig.size() != line.size();
    if (had_comment) {
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    }
    if (!(had_comment && trim(line).empty())) {
      if (!first) compact += '\n';
      compact += line;
      first = false;
    }
    if (ea == std::string_view::npos || eb == std::string_view::npos) break;
    before.remove_prefix(eb + 1);
    after.remove_prefix(ea + 1);
  }
  auto program = wrap_standalone(compact, rules.detect(compact));
  program.provenance.doc_id = snippet.doc_id;
  program.provenance.env_kind = snippet.env_kind;
  program.provenance.sibling_index = snippet.sibling_index;
  return program;
}

Json to_json(const Provenance& p) {
  return Json{{"doc_id", p.doc_id},
              {"source_kind", to_string(p.source_kind)},
              {"origin_key", p.origin_key},
              {"license", to_string(p.license)},
              {"date", p.date ? Json(*p.date) : Json(nullptr)},
              {"env_kind", to_string(p.env_kind)},
              {"sibling_index", p.sibling_index}};
}

Provenance provenance_from_json(const Json& j) {
  Provenance p;
  p.doc_id = j.value("doc_id", std::string());
  p.source_kind = parse_source_kind(j.value("source_kind", std::string("arxiv")));
  p.origin_key = j.value("origin_key", std::string());
  p.license = parse_license(j.value("license", std::string("unknown")));
  if (j.contains("date") && !j["date"].is_null()) p.date = j["date"].get<std::string>();
  p.env_kind = parse_env_kind(j.value("env_kind", std::string("tikzpicture")));
  p.sibling_index = j.value("sibling_index", std::size_t{0});
  return p;
}

Json to_json(const NormalizedProgram& p) {
  return Json{{"record_id", p.record_id},
              {"code", p.code},
              {"body", p.body},
              {"packages", p.packages},
              {"char_count", p.char_count},
              {"body_char_count", p.body_char_count},
              {"content_hash", p.content_hash},
              {"provenance", to_json(p.provenance)}};
}

NormalizedProgram normalized_program_from_json(const Json& j) {
  NormalizedProgram p;
  p.record_id = j.at("record_id").get<std::string>();
  p.code = j.at("code").get<std::string>();
  p.body = j.value("body", std::string());
  p.packages = j.value("packages", std::vector<std::string>{});
  p.char_count = utf8_length(p.code);
  p.body_char_count = utf8_length(p.body);
  p.content_hash = sha256_hex(p.code);
  if (j.contains("content_hash") && j["content_hash"] != p.content_hash) {
    throw InputError("record " + p.record_id + ": content_hash does not match code");
  }
  if (j.contains("provenance")) p.provenance = provenance_from_json(j["provenance"]);
  return p;
}

}  // namespace tikzkit
