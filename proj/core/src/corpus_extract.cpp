#include "tikzkit/corpus_extract.hpp"

#include <algorithm>
#include <array>
#include <regex>

#include "tex_scan.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {
namespace {

using detail::EnvEvent;

std::optional<EnvKind> target_kind(std::string_view name) {
  if (name == "tikzpicture") return EnvKind::tikzpicture;
  if (name == "tikzcd") return EnvKind::tikzcd;
  if (name == "circuitikz") return EnvKind::circuitikz;
  return std::nullopt;
}

bool is_container(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kContainers = {
      "figure",  "figure*",  "subfigure", "minipage",  "tabular",
      "tabular*", "tabularx", "wrapfigure", "subfigure*"};
  return std::find(kContainers.begin(), kContainers.end(), name) != kContainers.end();
}

struct Frame {
  std::size_t event_index;
  std::string name;
};

// Scan state saved when an outermost target opens, so that an unclosed
// target can be discarded and the scan resumed right after its \begin.
struct Checkpoint {
  std::vector<std::string> containers;
  std::size_t sibling_counter;
};

}  // namespace

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::arxiv: return "arxiv";
    case SourceKind::github: return "github";
    case SourceKind::texse: return "texse";
    case SourceKind::synthetic: return "synthetic";
    case SourceKind::curated: return "curated";
  }
  return "arxiv";
}

std::string_view to_string(LicenseClass l) {
  switch (l) {
    case LicenseClass::permissive_cc: return "permissive_cc";
    case LicenseClass::nonexclusive_dist: return "nonexclusive_dist";
    case LicenseClass::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(EnvKind e) {
  switch (e) {
    case EnvKind::tikzpicture: return "tikzpicture";
    case EnvKind::tikzcd: return "tikzcd";
    case EnvKind::circuitikz: return "circuitikz";
  }
  return "tikzpicture";
}

SourceKind parse_source_kind(std::string_view s) {
  for (auto k : {SourceKind::arxiv, SourceKind::github, SourceKind::texse,
                 SourceKind::synthetic, SourceKind::curated}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown source_kind '" + std::string(s) + "'");
}

LicenseClass parse_license(std::string_view s) {
  for (auto l : {LicenseClass::permissive_cc, LicenseClass::nonexclusive_dist,
                 LicenseClass::unknown}) {
    if (to_string(l) == s) return l;
  }
  throw InputError("unknown license '" + std::string(s) + "'");
}

EnvKind parse_env_kind(std::string_view s) {
  if (auto k = target_kind(s)) return *k;
  throw InputError("unknown env_kind '" + std::string(s) + "'");
}

void SourceDocument::validate() const {
  if (raw_text.empty()) throw InputError("document '" + id + "': raw_text is empty");
  if (origin_key.empty()) throw InputError("document '" + id + "': origin_key is empty");
}

bool is_balanced_environment(std::string_view body) {
  const auto scan = detail::scan_tex(body);
  if (scan.unterminated_verbatim || scan.events.size() < 2) return false;
  const auto& first = scan.events.front();
  const auto& last = scan.events.back();
  if (!first.is_begin || first.start != 0 || !target_kind(first.name)) return false;
  if (last.is_begin || last.name != first.name || last.end != body.size()) return false;
  std::vector<std::string_view> stack;
  for (std::size_t k = 0; k < scan.events.size(); ++k) {
    const auto& ev = scan.events[k];
    if (ev.is_begin) {
      stack.push_back(ev.name);
    } else {
      if (stack.empty() || stack.back() != ev.name) return false;
      stack.pop_back();
      // The first environment must close only at the very end.
      if (stack.empty() && k + 1 != scan.events.size()) return false;
    }
  }
  return stack.empty();
}

ExtractionResult extract_environments(const SourceDocument& doc) {
  ExtractionResult result;
  std::string sanitized;
  std::string_view text = doc.raw_text;
  if (!is_valid_utf8(text)) {
    sanitized = sanitize_utf8(text);
    text = sanitized;
  }
  const auto scan = detail::scan_tex(text);
  const auto& events = scan.events;
  auto diag = [&](std::size_t offset, std::string msg) {
    result.diagnostics.push_back({doc.id, offset, std::move(msg)});
  };
  if (scan.unterminated_verbatim) {
    diag(events.empty() ? 0 : events.back().start,
         "verbatim-like environment runs to end of input");
  }

  std::vector<std::string> containers;
  std::size_t sibling_counter = 0;
  std::vector<Frame> targets;
  bool poisoned = false;
  Checkpoint checkpoint;

  auto emit = [&](const EnvEvent& open, const EnvEvent& close) {
    const auto body = text.substr(open.start, close.end - open.start);
    if (poisoned) {
      diag(open.start, "skipped " + open.name + ": mismatched nested environments");
      return;
    }
    if (!is_balanced_environment(body)) {
      diag(open.start, "skipped " + open.name + ": unbalanced environments in body");
      return;
    }
    ExtractedSnippet s;
    s.doc_id = doc.id;
    s.env_kind = *target_kind(open.name);
    s.body = std::string(body);
    s.byte_span = {open.start, close.end};
    s.sibling_index = containers.empty() ? 0 : sibling_counter++;
    result.snippets.push_back(std::move(s));
  };

  std::size_t k = 0;
  while (true) {
    if (k == events.size()) {
      if (targets.empty()) break;
      // Outermost target never closed: drop its \begin and rescan after it.
      const auto& open = events[targets.front().event_index];
      diag(open.start, "unbalanced \\begin{" + open.name + "} without matching \\end");
      k = targets.front().event_index + 1;
      containers = checkpoint.containers;
      sibling_counter = checkpoint.sibling_counter;
      targets.clear();
      poisoned = false;
      continue;
    }
    const std::size_t index = k++;
    const EnvEvent& ev = events[index];
    const auto kind = target_kind(ev.name);

    if (targets.empty()) {
      if (kind && ev.is_begin) {
        checkpoint = {containers, sibling_counter};
        targets.push_back({index, ev.name});
        poisoned = false;
      } else if (kind) {
        diag(ev.start, "stray \\end{" + ev.name + "}");
      } else if (is_container(ev.name)) {
        if (ev.is_begin) {
          if (containers.empty()) sibling_counter = 0;
          containers.push_back(ev.name);
        } else {
          auto it = std::find(containers.rbegin(), containers.rend(), ev.name);
          if (it != containers.rend()) containers.erase(std::prev(it.base()), containers.end());
        }
      }
      continue;
    }

    if (!kind) continue;  // inner environments are verified by the balance check
    if (ev.is_begin) {
      targets.push_back({index, ev.name});
      continue;
    }
    auto it = std::find_if(targets.rbegin(), targets.rend(),
                           [&](const Frame& f) { return f.name == ev.name; });
    if (it == targets.rend()) {
      diag(ev.start, "stray \\end{" + ev.name + "} inside " + targets.front().name);
      poisoned = true;
      continue;
    }
    if (it != targets.rbegin()) {
      diag(ev.start, "mismatched \\end{" + ev.name + "}");
      poisoned = true;
    }
    const std::size_t outer = targets.front().event_index;
    targets.erase(std::prev(it.base()), targets.end());
    if (targets.empty()) emit(events[outer], ev);
  }
  return result;
}

std::string strip_comments(std::string_view body) {
  const auto scan = detail::scan_tex(body);
  if (scan.comments.empty()) return std::string(body);
  std::string out;
  out.reserve(body.size());
  std::size_t pos = 0;
  for (const auto& c : scan.comments) {
    out.append(body.substr(pos, c.begin - pos));
    pos = c.end;
  }
  out.append(body.substr(pos));
  return out;
}

bool has_external_refs(std::string_view body) {
  // A filename-like argument: one token, no whitespace, braces or macros.
  static const std::regex kRefs(
      R"(\\(input|include|includegraphics|includestandalone|lstinputlisting)(?![A-Za-z]))"
      R"(|\\pgfplotstableread\s*\{[^{}\s\\]+\})"
      R"(|\\addplot3?\+?\s*(\[[^\]]*\]\s*)?table\s*(\[[^\]]*\]\s*)?\{[^{}\s\\]+\})",
      std::regex::ECMAScript | std::regex::optimize);
  return std::regex_search(body.begin(), body.end(), kRefs);
}

std::vector<SourceDocument> load_document_tree(const std::filesystem::path& root,
                                               SourceKind kind,
                                               LicenseClass license) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InputError("not a directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".tex" || ext == ".pgf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceDocument> docs;
  for (const auto& file : files) {
    auto text = read_text_file(file);
    if (text.empty()) continue;
    const auto rel = fs::relative(file, root);
    SourceDocument d;
    d.id = rel.generic_string();
    d.source_kind = kind;
    d.raw_text = sanitize_utf8(text);
    d.license = license;
    d.origin_key = std::distance(rel.begin(), rel.end()) > 1 ? rel.begin()->string()
                                                             : rel.stem().string();
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<SourceDocument> read_document_manifest(const std::filesystem::path& path,
                                                   bool strict,
                                                   std::vector<LineDiagnostic>* diagnostics) {
  auto rows = read_jsonl(path, strict);
  std::vector<SourceDocument> docs;
  std::size_t row_no = 0;
  for (const auto& row : rows.rows) {
    ++row_no;
    try {
      auto d = source_document_from_json(row);
      d.validate();
      docs.push_back(std::move(d));
    } catch (const std::exception& e) {
      if (strict) throw InputError("manifest row " + std::to_string(row_no) + ": " + e.what());
      rows.diagnostics.push_back({row_no, e.what()});
    }
  }
  if (diagnostics) *diagnostics = std::move(rows.diagnostics);
  return docs;
}

Json to_json(const SourceDocument& doc) {
  Json j{{"id", doc.id},
         {"source_kind", to_string(doc.source_kind)},
         {"raw_text", doc.raw_text},
         {"license", to_string(doc.license)},
         {"origin_key", doc.origin_key}};
  j["date"] = doc.date ? Json(*doc.date) : Json(nullptr);
  return j;
}

SourceDocument source_document_from_json(const Json& j) {
  SourceDocument d;
  d.id = j.at("id").get<std::string>();
  d.source_kind = parse_source_kind(j.at("source_kind").get<std::string>());
  d.raw_text = sanitize_utf8(j.at("raw_text").get<std::string>());
  if (j.contains("date") && !j["date"].is_null()) d.date = j["date"].get<std::string>();
  d.license = parse_license(j.value("license", std::string("unknown")));
  d.origin_key = j.at("origin_key").get<std::string>();
  return d;
}

Json to_json(const ExtractedSnippet& s) {
  return Json{{"doc_id", s.doc_id},
              {"env_kind", to_string(s.env_kind)},
              {"body", s.body},
              {"byte_span", Json::array({s.byte_span.begin, s.byte_span.end})},
              {"sibling_index", s.sibling_index}};
}

ExtractedSnippet snippet_from_json(const Json& j) {
  ExtractedSnippet s;
  s.doc_id = j.at("doc_id").get<std::string>();
  s.env_kind = parse_env_kind(j.at("env_kind").get<std::string>());
  s.body = j.at("body").get<std::string>();
  const auto& span = j.at("byte_span");
  s.byte_span = {span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()};
  s.sibling_index = j.at("sibling_index").get<std::size_t>();
  return s;
}

Json to_json(const ExtractionDiagnostic& d) {
  return Json{{"doc_id", d.doc_id}, {"offset", d.offset}, {"message", d.message}};
}

}  // namespace tikzkit
