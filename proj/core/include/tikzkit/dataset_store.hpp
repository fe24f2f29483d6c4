#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/compile_harness.hpp"
#include "tikzkit/corpus_extract.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

inline constexpr std::string_view kRecordSchema = "tikzkit.record/1";

enum class Split { train, test, quarantine };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct RepairStatus {
  enum class Kind { not_needed, repaired, failed };
  Kind kind = Kind::not_needed;
  int iteration = 0;  // set when repaired

  static RepairStatus not_needed() { return {}; }
  static RepairStatus repaired_at(int k) { return {Kind::repaired, k}; }
  static RepairStatus failed() { return {Kind::failed, 0}; }
  bool operator==(const RepairStatus&) const = default;
};
std::string to_string(const RepairStatus& r);
RepairStatus parse_repair_status(std::string_view s);

// Redistribution is only assumed for permissively licensed sources.
bool redistributable(LicenseClass license);

struct TikZRecord {
  std::string record_id;
  SourceKind source_kind = SourceKind::arxiv;
  std::string origin_key;
  LicenseClass license = LicenseClass::unknown;
  std::optional<std::string> date;
  std::string code;
  std::string content_hash;
  std::optional<std::string> caption;
  std::optional<std::string> description;
  // Current status: after a successful repair the new version carries ok.
  std::optional<CompileStatus> compile_status;
  std::optional<RepairStatus> repair_outcome;
  std::optional<std::string> image_artifact;
  std::optional<Split> split;
  // Append-only audit trail, one entry per stage that produced a version.
  std::vector<Json> stage_history;
  // Unknown fields read from disk, written back unchanged.
  Json extra = Json::object();

  bool operator==(const TikZRecord&) const = default;

  // A copy with one more stage_history entry.
  TikZRecord next_version(std::string_view stage, Json details = Json::object()) const;
  // True when the record compiled before any repair.
  bool first_pass_ok() const;
};

// Enforces the per-record invariants (non-empty id, test => compiled and
// described). Returns violations, empty when valid.
std::vector<std::string> record_violations(const TikZRecord& r);

Json to_json(const TikZRecord& r);
TikZRecord record_from_json(const Json& j);

struct WriteReceipt {
  std::filesystem::path path;
  std::filesystem::path index_path;
  std::size_t count = 0;
  std::string sha256;  // of the written data file
};

// Rejects duplicate ids and invalid records (InputError). Writes
// <path> and the id index <path>.idx.
WriteReceipt write_records(const std::vector<TikZRecord>& records,
                           const std::filesystem::path& path);

struct RecordReadResult {
  std::vector<TikZRecord> records;
  std::vector<LineDiagnostic> diagnostics;
};

// strict: the first malformed line throws InputError naming the line.
RecordReadResult read_records(const std::filesystem::path& path, bool strict = true);

// Index-assisted lookup; falls back to a scan when the index is stale.
std::optional<TikZRecord> lookup_record(const std::filesystem::path& path,
                                        std::string_view record_id);

struct CorpusStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_source;
  std::map<std::string, double> first_pass_rate_per_source;
  std::map<std::string, double> final_rate_per_source;
  std::size_t compile_attempted = 0;
  std::size_t first_pass_ok = 0;
  double first_pass_rate = 0.0;
  std::map<int, std::size_t> repaired_at;  // iteration -> count
  std::size_t repair_failed = 0;
  std::map<std::string, double> license_shares;
  std::map<std::string, std::size_t> splits;
  std::size_t described = 0;
};

CorpusStats corpus_stats(const std::vector<TikZRecord>& records);
Json to_json(const CorpusStats& s);

}  // namespace tikzkit
