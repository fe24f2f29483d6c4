#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tikzkit/decontaminate.hpp"
#include "tikzkit/errors.hpp"

using namespace tikzkit;
using tikzkit::testing::standalone;

namespace {

std::string random_body(std::mt19937_64& rng) {
  std::string s = "\\begin{tikzpicture}\n";
  const int lines = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < lines; ++i) {
    s += "\\draw (" + std::to_string(rng() % 1000) + "," + std::to_string(rng() % 1000) + ") -- (" +
         std::to_string(rng() % 1000) + "," + std::to_string(rng() % 1000) + ");\n";
  }
  return s + "\\end{tikzpicture}";
}

TikZRecord record(std::string id, std::string origin, std::string date, std::string body) {
  TikZRecord r;
  r.record_id = std::move(id);
  r.origin_key = std::move(origin);
  r.date = std::move(date);
  r.code = standalone(body);
  r.compile_status = CompileStatus::ok;
  r.description = "A description.";
  return r;
}

std::vector<TikZRecord> random_corpus(std::mt19937_64& rng, int n) {
  std::vector<TikZRecord> v;
  for (int i = 0; i < n; ++i) {
    const bool late = rng() % 3 == 0;
    const std::string date = late ? "2025-0" + std::to_string(6 + rng() % 4) + "-1" + std::to_string(rng() % 10)
                                  : "2024-0" + std::to_string(1 + rng() % 9) + "-10";
    v.push_back(record("r" + std::to_string(i), "o" + std::to_string(rng() % (n / 2 + 1)), date, random_body(rng)));
  }
  for (std::size_t i = 1; i < v.size(); i += 7) v[i].code = v[i - 1].code;
  return v;
}

std::set<std::string> grams_of(const TikZRecord& r, std::size_t n) {
  return oracle::ngrams(contamination_tokens(r.code), n);
}

}  // namespace

TEST(DateSplit, StrictlyAfterCutoff) {
  SplitPolicy p;
  std::vector<TikZRecord> rs = {record("a", "1", "2025-05-31", "x"), record("b", "2", "2025-06-01", "x"),
                                record("c", "3", "2025-06-01T10:00:00Z", "x"), record("d", "4", "", "x")};
  rs[3].date.reset();
  const auto s = date_split(rs, p);
  ASSERT_EQ(s.test_candidates.size(), 2u);
  EXPECT_EQ(s.test_candidates[0].record_id, "b");
  EXPECT_EQ(s.train_candidates.size(), 2u);
  EXPECT_EQ(date_key("2025-06-01T10:00:00Z"), "2025-06-01");
  EXPECT_EQ(date_key("June 2025"), "");
}

TEST(Split, PropertiesOnRandomCorpora) {
  std::mt19937_64 rng(31);
  std::size_t seen_train = 0, seen_test = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto corpus = random_corpus(rng, 60);
    SplitPolicy policy;
    const auto out = run_split(corpus, policy);
    std::vector<const TikZRecord*> train, test;
    std::set<std::string> test_origins;
    for (const auto& r : out.records) {
      ASSERT_TRUE(r.split);
      if (r.split == Split::train) train.push_back(&r);
      if (r.split == Split::test) {
        test.push_back(&r);
        EXPECT_TRUE(test_origins.insert(r.origin_key).second) << "origin reused: " << r.origin_key;
      }
    }
    // Brute-force: no surviving train record shares an n-gram with any test record.
    std::set<std::string> test_grams;
    for (const auto* t : test) {
      const auto g = grams_of(*t, policy.ngram_n);
      test_grams.insert(g.begin(), g.end());
    }
    for (const auto* r : train) {
      for (const auto& g : grams_of(*r, policy.ngram_n)) {
        EXPECT_FALSE(test_grams.contains(g)) << r->record_id;
      }
    }
    // No train record shares an origin with a test record.
    for (const auto* r : train) EXPECT_FALSE(test_origins.contains(r->origin_key));
    // Deterministic.
    const auto again = run_split(corpus, policy);
    EXPECT_EQ(again.records, out.records);
    EXPECT_EQ(to_json(again.report).dump(), to_json(out.report).dump());
    EXPECT_EQ(out.review_queue.size(), out.report.flagged_pairs.size());
    seen_train += train.size();
    seen_test += test.size();
  }
  EXPECT_GT(seen_train, 0u);
  EXPECT_GT(seen_test, 0u);
}

TEST(Split, WrapperLinesNeverCountAsOverlap) {
  const auto toks = contamination_tokens(
      "\\documentclass[tikz]{standalone}\n\\usepackage{tikz-cd}\n\\usetikzlibrary{arrows}\n"
      "\\begin{document}\n\\draw;\n\\end{document}\n");
  EXPECT_EQ(toks, (std::vector<std::string>{"\\draw", ";"}));
}

TEST(Split, IneligiblePostCutoffRecordsFallBackToTrain) {
  auto r = record("late", "o", "2025-09-01", "\\begin{tikzpicture}\\end{tikzpicture}");
  r.description.reset();
  const auto out = run_split({r}, SplitPolicy{});
  EXPECT_EQ(out.records[0].split, Split::train);
}

TEST(Split, NgramFlagsQuarantineTrain) {
  const std::string shared = "\\begin{tikzpicture}\n\\draw (0,0) -- (1,1) -- (2,2) -- (3,3);\n\\end{tikzpicture}";
  const auto out = run_split({record("old", "a", "2024-01-01", shared), record("new", "b", "2025-08-01", shared)},
                             SplitPolicy{});
  EXPECT_EQ(out.records[0].split, Split::quarantine);
  EXPECT_EQ(out.records[1].split, Split::test);
  ASSERT_EQ(out.report.flagged_pairs.size(), 1u);
  EXPECT_EQ(out.report.flagged_pairs[0].train_id, "old");
}

TEST(Split, OnePerOriginKeepsLowestId) {
  const auto out = run_split({record("b2", "same", "2025-08-01", "\\draw (0,0);"),
                              record("b1", "same", "2025-08-02", "\\node {q};")},
                             SplitPolicy{});
  EXPECT_EQ(out.records[1].split, Split::test);
  EXPECT_EQ(out.records[0].split, Split::quarantine);
}

TEST(SplitPolicy, Validation) {
  SplitPolicy p;
  p.test_after_date = "yesterday";
  p.ngram_n = 0;
  try {
    p.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.violations().size(), 2u);
  }
  EXPECT_THROW(run_split({record("x", "a", "2024-01-01", "q"), record("x", "b", "2024-01-01", "q")},
                         SplitPolicy{}),
               InputError);
}
