#include "tikzkit/dataset_store.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "tikzkit/digest.hpp"
#include "tikzkit/errors.hpp"

namespace tikzkit {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::quarantine: return "quarantine";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  for (auto v : {Split::train, Split::test, Split::quarantine}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown split '" + std::string(s) + "'");
}

std::string to_string(const RepairStatus& r) {
  switch (r.kind) {
    case RepairStatus::Kind::not_needed: return "not_needed";
    case RepairStatus::Kind::failed: return "failed";
    case RepairStatus::Kind::repaired: return "repaired_at(" + std::to_string(r.iteration) + ")";
  }
  return "failed";
}

RepairStatus parse_repair_status(std::string_view s) {
  if (s == "not_needed") return RepairStatus::not_needed();
  if (s == "failed") return RepairStatus::failed();
  if (s.starts_with("repaired_at(") && s.ends_with(")")) {
    const auto digits = s.substr(12, s.size() - 13);
    try {
      std::size_t used = 0;
      const int k = std::stoi(std::string(digits), &used);
      if (used == digits.size() && k >= 1) return RepairStatus::repaired_at(k);
    } catch (const std::exception&) {
    }
  }
  throw InputError("unknown repair outcome '" + std::string(s) + "'");
}

bool redistributable(LicenseClass license) { return license == LicenseClass::permissive_cc; }

TikZRecord TikZRecord::next_version(std::string_view stage, Json details) const {
  TikZRecord r = *this;
  details["stage"] = std::string(stage);
  r.stage_history.push_back(std::move(details));
  return r;
}

bool TikZRecord::first_pass_ok() const {
  if (compile_status != CompileStatus::ok) return false;
  return !repair_outcome || repair_outcome->kind == RepairStatus::Kind::not_needed;
}

std::vector<std::string> record_violations(const TikZRecord& r) {
  std::vector<std::string> v;
  if (r.record_id.empty()) v.emplace_back("record_id is empty");
  if (r.split == Split::test) {
    if (r.compile_status != CompileStatus::ok) {
      v.push_back(r.record_id + ": test record must compile");
    }
    if (!r.description || r.description->empty()) {
      v.push_back(r.record_id + ": test record needs a description");
    }
  }
  return v;
}

namespace {

const std::set<std::string, std::less<>> kKnownFields = {
    "schema",      "record_id",      "source_kind",  "origin_key",     "license",
    "date",        "code",           "content_hash", "caption",        "description",
    "compile_status", "repair_outcome", "image_artifact", "split",     "stage_history",
    "redistributable"};

template <class T, class F>
Json opt(const std::optional<T>& v, F&& f) {
  return v ? Json(f(*v)) : Json(nullptr);
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

Json to_json(const TikZRecord& r) {
  Json j = r.extra.is_object() ? r.extra : Json::object();
  auto ident = [](const std::string& s) { return s; };
  j["schema"] = std::string(kRecordSchema);
  j["record_id"] = r.record_id;
  j["source_kind"] = std::string(to_string(r.source_kind));
  j["origin_key"] = r.origin_key;
  j["license"] = std::string(to_string(r.license));
  j["redistributable"] = redistributable(r.license);
  j["date"] = opt(r.date, ident);
  j["code"] = r.code;
  j["content_hash"] = r.content_hash;
  j["caption"] = opt(r.caption, ident);
  j["description"] = opt(r.description, ident);
  j["compile_status"] =
      opt(r.compile_status, [](CompileStatus s) { return std::string(to_string(s)); });
  j["repair_outcome"] = opt(r.repair_outcome, [](const RepairStatus& s) { return to_string(s); });
  j["image_artifact"] = opt(r.image_artifact, ident);
  j["split"] = opt(r.split, [](Split s) { return std::string(to_string(s)); });
  j["stage_history"] = r.stage_history;
  return j;
}

TikZRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("record is not a JSON object");
  if (j.contains("schema") && j["schema"] != std::string(kRecordSchema)) {
    throw InputError("unsupported record schema " + j["schema"].dump());
  }
  TikZRecord r;
  try {
    r.record_id = j.at("record_id").get<std::string>();
    r.source_kind = parse_source_kind(j.value("source_kind", std::string("arxiv")));
    r.origin_key = j.value("origin_key", std::string());
    r.license = parse_license(j.value("license", std::string("unknown")));
    r.date = opt_string(j, "date");
    r.code = j.value("code", std::string());
    r.content_hash = j.value("content_hash", std::string());
    r.caption = opt_string(j, "caption");
    r.description = opt_string(j, "description");
    if (auto s = opt_string(j, "compile_status")) r.compile_status = parse_compile_status(*s);
    if (auto s = opt_string(j, "repair_outcome")) r.repair_outcome = parse_repair_status(*s);
    r.image_artifact = opt_string(j, "image_artifact");
    if (auto s = opt_string(j, "split")) r.split = parse_split(*s);
    if (j.contains("stage_history")) {
      r.stage_history = j["stage_history"].get<std::vector<Json>>();
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed record: ") + e.what());
  }
  for (const auto& [k, v] : j.items()) {
    if (!kKnownFields.contains(k)) r.extra[k] = v;
  }
  return r;
}

WriteReceipt write_records(const std::vector<TikZRecord>& records,
                           const std::filesystem::path& path) {
  std::unordered_set<std::string> ids;
  std::vector<std::string> problems;
  for (const auto& r : records) {
    for (auto& v : record_violations(r)) problems.push_back(std::move(v));
    if (!ids.insert(r.record_id).second) problems.push_back("duplicate record_id " + r.record_id);
  }
  if (!problems.empty()) {
    std::string msg = "refusing to write invalid records:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  std::string data;
  std::string index;
  for (const auto& r : records) {
    const auto line = to_jsonl_line(to_json(r));
    index += to_jsonl_line(Json{{"record_id", r.record_id}, {"offset", data.size()},
                                {"length", line.size()}});
    index += '\n';
    data += line;
    data += '\n';
  }
  WriteReceipt receipt;
  receipt.path = path;
  receipt.index_path = path.string() + ".idx";
  receipt.count = records.size();
  receipt.sha256 = sha256_hex(data);
  write_text_file(path, data);
  write_text_file(receipt.index_path,
                  to_jsonl_line(Json{{"data_sha256", receipt.sha256}, {"count", records.size()}}) +
                      "\n" + index);
  return receipt;
}

RecordReadResult read_records(const std::filesystem::path& path, bool strict) {
  const std::string text = read_text_file(path);
  RecordReadResult out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      Json row = Json::parse(line);
      out.records.push_back(record_from_json(row));
    } catch (const std::exception& e) {
      const std::string msg = path.string() + ":" + std::to_string(line_no) + ": " + e.what();
      if (strict) throw InputError(msg);
      out.diagnostics.push_back({line_no, msg});
    }
  }
  return out;
}

std::optional<TikZRecord> lookup_record(const std::filesystem::path& path,
                                        std::string_view record_id) {
  const std::filesystem::path index_path = path.string() + ".idx";
  std::error_code ec;
  if (std::filesystem::exists(index_path, ec)) {
    const std::string data = read_text_file(path);
    const auto rows = read_jsonl(index_path, false).rows;
    if (!rows.empty() && rows[0].value("data_sha256", std::string()) == sha256_hex(data)) {
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].value("record_id", std::string()) != record_id) continue;
        const auto offset = rows[i].at("offset").get<std::size_t>();
        const auto length = rows[i].at("length").get<std::size_t>();
        if (offset + length > data.size()) break;
        return record_from_json(Json::parse(data.substr(offset, length)));
      }
      return std::nullopt;
    }
  }
  for (auto& r : read_records(path, false).records) {
    if (r.record_id == record_id) return std::move(r);
  }
  return std::nullopt;
}

CorpusStats corpus_stats(const std::vector<TikZRecord>& records) {
  CorpusStats s;
  s.total = records.size();
  std::map<std::string, std::size_t> attempted, first_ok, final_ok, licenses;
  for (const auto& r : records) {
    const std::string src(to_string(r.source_kind));
    ++s.per_source[src];
    ++licenses[std::string(to_string(r.license))];
    if (r.split) ++s.splits[std::string(to_string(*r.split))];
    if (r.description) ++s.described;
    if (r.compile_status) {
      ++s.compile_attempted;
      ++attempted[src];
      if (r.first_pass_ok()) {
        ++s.first_pass_ok;
        ++first_ok[src];
      }
      if (*r.compile_status == CompileStatus::ok) ++final_ok[src];
    }
    if (r.repair_outcome) {
      if (r.repair_outcome->kind == RepairStatus::Kind::repaired) {
        ++s.repaired_at[r.repair_outcome->iteration];
      } else if (r.repair_outcome->kind == RepairStatus::Kind::failed) {
        ++s.repair_failed;
      }
    }
  }
  if (s.compile_attempted > 0) {
    s.first_pass_rate =
        static_cast<double>(s.first_pass_ok) / static_cast<double>(s.compile_attempted);
  }
  for (const auto& [src, n] : attempted) {
    s.first_pass_rate_per_source[src] = static_cast<double>(first_ok[src]) / static_cast<double>(n);
    s.final_rate_per_source[src] = static_cast<double>(final_ok[src]) / static_cast<double>(n);
  }
  for (const auto& [lic, n] : licenses) {
    s.license_shares[lic] = static_cast<double>(n) / static_cast<double>(s.total);
  }
  return s;
}

Json to_json(const CorpusStats& s) {
  Json repaired = Json::object();
  for (const auto& [k, n] : s.repaired_at) repaired[std::to_string(k)] = n;
  return Json{{"total", s.total},
              {"per_source", s.per_source},
              {"first_pass_rate_per_source", s.first_pass_rate_per_source},
              {"final_rate_per_source", s.final_rate_per_source},
              {"compile_attempted", s.compile_attempted},
              {"first_pass_ok", s.first_pass_ok},
              {"first_pass_rate", s.first_pass_rate},
              {"repaired_at", repaired},
              {"repair_failed", s.repair_failed},
              {"license_shares", s.license_shares},
              {"splits", s.splits},
              {"described", s.described}};
}

}  // namespace tikzkit
