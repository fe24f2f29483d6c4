#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/dataset_store.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

struct SplitPolicy {
  std::string test_after_date = "2025-05-31";  // yyyy-mm-dd, strict-after
  std::size_t ngram_n = 8;
  // 0: any shared n-gram flags a pair. Otherwise a pair is flagged when
  // shared / min(#ngrams(test), #ngrams(train)) >= threshold.
  double token_overlap_threshold = 0.0;
  bool one_per_origin = true;

  void validate() const;
};

Json to_json(const SplitPolicy& p);
SplitPolicy split_policy_from_json(const Json& j);

// yyyy-mm-dd prefix of an ISO-8601 date or timestamp; empty when malformed.
std::string date_key(std::string_view iso);

struct DateSplit {
  std::vector<TikZRecord> train_candidates;
  std::vector<TikZRecord> test_candidates;
};

// Dated strictly after the cutoff -> test candidate; everything else,
// including undated or malformed dates, -> train candidate.
DateSplit date_split(std::vector<TikZRecord> records, const SplitPolicy& policy);

struct OriginSplit {
  std::vector<TikZRecord> test;
  std::vector<TikZRecord> train;
  std::vector<TikZRecord> removed;  // lost to a same-origin test record
};

// Keeps the lowest record_id per origin as the test representative and
// removes every other record with that origin from both sides.
OriginSplit enforce_origin_uniqueness(std::vector<TikZRecord> test_candidates,
                                      std::vector<TikZRecord> train, const SplitPolicy& policy);

// Lexer tokens of the code with standalone wrapper lines (class, package
// and library directives, document delimiters) left out.
std::vector<std::string> contamination_tokens(std::string_view code);

struct FlaggedPair {
  std::string test_id;
  std::string train_id;
  std::size_t shared_ngrams = 0;
};

struct ContaminationReport {
  std::vector<FlaggedPair> flagged_pairs;
  std::vector<std::string> removed_from_train;  // sorted, unique
  std::vector<std::string> removed_from_test;   // sorted, unique
};

Json to_json(const ContaminationReport& r);

// Flags train records sharing n-grams with any test record. Pairs are
// ordered by (test_id, train_id).
ContaminationReport ngram_filter(const std::vector<TikZRecord>& test,
                                 const std::vector<TikZRecord>& train,
                                 const SplitPolicy& policy);

struct SplitOutcome {
  std::vector<TikZRecord> records;  // input order, split assigned
  ContaminationReport report;
  std::vector<Json> review_queue;   // one row per flagged pair
};

// date split -> test eligibility (compiled and described) -> origin
// uniqueness -> n-gram filter. Removed records land in quarantine.
SplitOutcome run_split(const std::vector<TikZRecord>& records, const SplitPolicy& policy);

}  // namespace tikzkit
