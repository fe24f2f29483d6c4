#include "tikzkit/decontaminate.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "tikzkit/errors.hpp"
#include "tikzkit/tex_lexer.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {
namespace {

constexpr std::string_view kWrapperPrefixes[] = {
    "\\documentclass", "\\usepackage",   "\\usetikzlibrary", "\\usepgfplotslibrary",
    "\\usegdlibrary",  "\\pgfplotsset{compat", "\\begin{document}", "\\end{document}"};

bool valid_date(std::string_view d) {
  static const std::regex re(R"(\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01]))");
  return std::regex_match(d.begin(), d.end(), re);
}

using NgramSet = std::unordered_set<std::string>;

NgramSet ngrams_of(const std::vector<std::string>& tokens, std::size_t n) {
  NgramSet out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += tokens[i + k];
      key += '\x1f';
    }
    out.insert(std::move(key));
  }
  return out;
}

bool test_eligible(const TikZRecord& r) {
  return r.compile_status == CompileStatus::ok && r.description && !trim(*r.description).empty();
}

}  // namespace

void SplitPolicy::validate() const {
  std::vector<std::string> v;
  if (!valid_date(test_after_date)) v.emplace_back("split.test_after_date must be yyyy-mm-dd");
  if (ngram_n < 2) v.emplace_back("split.ngram_n must be >= 2");
  if (token_overlap_threshold < 0 || token_overlap_threshold > 1) {
    v.emplace_back("split.token_overlap_threshold must be in [0,1]");
  }
  if (!v.empty()) throw ConfigError(std::move(v));
}

Json to_json(const SplitPolicy& p) {
  return Json{{"test_after_date", p.test_after_date},
              {"ngram_n", p.ngram_n},
              {"token_overlap_threshold", p.token_overlap_threshold},
              {"one_per_origin", p.one_per_origin}};
}

SplitPolicy split_policy_from_json(const Json& j) {
  SplitPolicy p;
  p.test_after_date = j.value("test_after_date", p.test_after_date);
  p.ngram_n = j.value("ngram_n", p.ngram_n);
  p.token_overlap_threshold = j.value("token_overlap_threshold", p.token_overlap_threshold);
  p.one_per_origin = j.value("one_per_origin", p.one_per_origin);
  return p;
}

std::string date_key(std::string_view iso) {
  if (iso.size() < 10) return {};
  const auto head = iso.substr(0, 10);
  if (!valid_date(head)) return {};
  if (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ') return {};
  return std::string(head);
}

DateSplit date_split(std::vector<TikZRecord> records, const SplitPolicy& policy) {
  policy.validate();
  DateSplit out;
  for (auto& r : records) {
    const auto key = r.date ? date_key(*r.date) : std::string();
    if (!key.empty() && key > policy.test_after_date) {
      out.test_candidates.push_back(std::move(r));
    } else {
      out.train_candidates.push_back(std::move(r));
    }
  }
  return out;
}

OriginSplit enforce_origin_uniqueness(std::vector<TikZRecord> test_candidates,
                                      std::vector<TikZRecord> train, const SplitPolicy& policy) {
  OriginSplit out;
  if (!policy.one_per_origin) {
    out.test = std::move(test_candidates);
    out.train = std::move(train);
    return out;
  }
  std::map<std::string, std::string> winner;  // origin -> lowest record_id
  for (const auto& r : test_candidates) {
    auto [it, inserted] = winner.try_emplace(r.origin_key, r.record_id);
    if (!inserted && r.record_id < it->second) it->second = r.record_id;
  }
  for (auto& r : test_candidates) {
    if (winner.at(r.origin_key) == r.record_id) {
      out.test.push_back(std::move(r));
    } else {
      out.removed.push_back(std::move(r));
    }
  }
  for (auto& r : train) {
    if (winner.contains(r.origin_key)) {
      out.removed.push_back(std::move(r));
    } else {
      out.train.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::string> contamination_tokens(std::string_view code) {
  std::string kept;
  kept.reserve(code.size());
  std::size_t pos = 0;
  while (pos <= code.size()) {
    auto eol = code.find('\n', pos);
    if (eol == std::string_view::npos) eol = code.size();
    const auto line = code.substr(pos, eol - pos);
    const auto t = trim(line);
    const bool wrapper = std::any_of(std::begin(kWrapperPrefixes), std::end(kWrapperPrefixes),
                                     [&](std::string_view p) { return t.starts_with(p); });
    if (!wrapper) {
      kept += line;
      kept += '\n';
    }
    pos = eol + 1;
  }
  return significant_lexemes(kept);
}

Json to_json(const ContaminationReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.flagged_pairs) {
    pairs.push_back({{"test_id", p.test_id}, {"train_id", p.train_id},
                     {"shared_ngram_count", p.shared_ngrams}});
  }
  return Json{{"flagged_pairs", std::move(pairs)},
              {"removed_from_train", r.removed_from_train},
              {"removed_from_test", r.removed_from_test}};
}

ContaminationReport ngram_filter(const std::vector<TikZRecord>& test,
                                 const std::vector<TikZRecord>& train,
                                 const SplitPolicy& policy) {
  policy.validate();
  // Single-writer index: n-gram -> test records containing it.
  std::unordered_map<std::string, std::vector<std::size_t>> index;
  std::vector<std::size_t> test_sizes(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto grams = ngrams_of(contamination_tokens(test[i].code), policy.ngram_n);
    test_sizes[i] = grams.size();
    for (auto& g : grams) index[g].push_back(i);
  }
  ContaminationReport report;
  std::set<std::string> removed;
  for (const auto& tr : train) {
    const auto grams = ngrams_of(contamination_tokens(tr.code), policy.ngram_n);
    std::map<std::size_t, std::size_t> shared;  // test index -> count
    for (const auto& g : grams) {
      if (auto it = index.find(g); it != index.end()) {
        for (auto i : it->second) ++shared[i];
      }
    }
    for (const auto& [i, count] : shared) {
      bool flag = count > 0;
      if (policy.token_overlap_threshold > 0) {
        const auto denom = std::min(test_sizes[i], grams.size());
        flag = denom > 0 &&
               static_cast<double>(count) / static_cast<double>(denom) >= policy.token_overlap_threshold;
      }
      if (flag) {
        report.flagged_pairs.push_back({test[i].record_id, tr.record_id, count});
        removed.insert(tr.record_id);
      }
    }
  }
  std::sort(report.flagged_pairs.begin(), report.flagged_pairs.end(),
            [](const FlaggedPair& a, const FlaggedPair& b) {
              return std::tie(a.test_id, a.train_id) < std::tie(b.test_id, b.train_id);
            });
  report.removed_from_train.assign(removed.begin(), removed.end());
  return report;
}

SplitOutcome run_split(const std::vector<TikZRecord>& records, const SplitPolicy& policy) {
  policy.validate();
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.record_id).second) throw InputError("duplicate record_id " + r.record_id);
  }
  auto dated = date_split(records, policy);
  std::vector<TikZRecord> eligible;
  for (auto& r : dated.test_candidates) {
    if (test_eligible(r)) {
      eligible.push_back(std::move(r));
    } else {
      dated.train_candidates.push_back(std::move(r));
    }
  }
  auto origin = enforce_origin_uniqueness(std::move(eligible), std::move(dated.train_candidates),
                                          policy);
  SplitOutcome out;
  out.report = ngram_filter(origin.test, origin.train, policy);

  std::map<std::string, std::pair<Split, std::string>> assignment;
  for (const auto& r : origin.test) assignment[r.record_id] = {Split::test, "test"};
  for (const auto& r : origin.train) assignment[r.record_id] = {Split::train, "train"};
  std::set<std::string> removed_test;
  for (const auto& r : origin.removed) {
    assignment[r.record_id] = {Split::quarantine, "same origin as a test record"};
    if (r.date && !date_key(*r.date).empty() && date_key(*r.date) > policy.test_after_date &&
        test_eligible(r)) {
      removed_test.insert(r.record_id);
    }
  }
  std::set<std::string> removed_train(out.report.removed_from_train.begin(),
                                      out.report.removed_from_train.end());
  for (const auto& r : origin.removed) {
    if (!removed_test.contains(r.record_id)) removed_train.insert(r.record_id);
  }
  for (const auto& id : out.report.removed_from_train) {
    assignment[id] = {Split::quarantine, "shares n-grams with a test record"};
  }
  out.report.removed_from_train.assign(removed_train.begin(), removed_train.end());
  out.report.removed_from_test.assign(removed_test.begin(), removed_test.end());

  for (const auto& r : records) {
    const auto& [split, reason] = assignment.at(r.record_id);
    auto next = r.next_version("split", Json{{"split", to_string(split)}, {"reason", reason}});
    next.split = split;
    out.records.push_back(std::move(next));
  }
  for (const auto& p : out.report.flagged_pairs) {
    out.review_queue.push_back({{"test_id", p.test_id},
                                {"train_id", p.train_id},
                                {"shared_ngram_count", p.shared_ngrams},
                                {"action", "removed train record; confirm manually"}});
  }
  return out;
}

}  // namespace tikzkit
