#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "test_support.hpp"
#include "tikzkit/dataset_store.hpp"
#include "tikzkit/errors.hpp"

using namespace tikzkit;
using tikzkit::testing::ScratchDir;

namespace {

TikZRecord make(std::size_t i, std::mt19937_64& rng) {
  TikZRecord r;
  r.record_id = "rec-" + std::to_string(i);
  r.source_kind = static_cast<SourceKind>(rng() % 5);
  r.origin_key = "origin-" + std::to_string(rng() % 97);
  r.license = static_cast<LicenseClass>(rng() % 3);
  if (rng() % 4) r.date = "2025-0" + std::to_string(1 + rng() % 9) + "-15";
  r.code = "\\documentclass[tikz]{standalone}\n\\begin{document}\n\\draw (" + std::to_string(i) +
           ",0);\n\\end{document}\n";
  r.content_hash = std::string(64, 'a' + static_cast<char>(i % 6));
  if (rng() % 2) r.caption = "caption \"quoted\" \xE2\x9C\x93";
  switch (rng() % 4) {
    case 0: break;
    case 1: r.compile_status = CompileStatus::ok; break;
    case 2:
      r.compile_status = CompileStatus::compile_error;
      r.repair_outcome = RepairStatus::failed();
      break;
    default:
      r.compile_status = CompileStatus::ok;
      r.repair_outcome = RepairStatus::repaired_at(1 + static_cast<int>(rng() % 3));
  }
  if (r.compile_status == CompileStatus::ok) {
    r.image_artifact = "artifacts/" + r.record_id + ".png";
    if (rng() % 2) r.description = "A drawing.";
  }
  if (r.description && rng() % 2) r.split = Split::test;
  else if (rng() % 2) r.split = Split::train;
  r.stage_history.push_back(Json{{"stage", "normalize"}, {"doc_id", "d"}});
  return r;
}

}  // namespace

TEST(DatasetStore, RoundTripThousandRecords) {
  ScratchDir dir("store");
  std::mt19937_64 rng(5);
  std::vector<TikZRecord> records;
  for (std::size_t i = 0; i < 1000; ++i) records.push_back(make(i, rng));
  const auto receipt = write_records(records, dir.path() / "r.jsonl");
  EXPECT_EQ(receipt.count, 1000u);
  EXPECT_TRUE(std::filesystem::exists(receipt.index_path));
  const auto back = read_records(dir.path() / "r.jsonl");
  EXPECT_TRUE(back.diagnostics.empty());
  ASSERT_EQ(back.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(back.records[i], records[i]) << i;
  // Rewriting what was read is byte-stable.
  const auto again = write_records(back.records, dir.path() / "r2.jsonl");
  EXPECT_EQ(again.sha256, receipt.sha256);
}

TEST(DatasetStore, StatsMatchRecount) {
  std::mt19937_64 rng(6);
  std::vector<TikZRecord> records;
  for (std::size_t i = 0; i < 700; ++i) records.push_back(make(i, rng));
  const auto s = corpus_stats(records);
  std::size_t attempted = 0, first = 0, failed = 0, described = 0;
  std::map<int, std::size_t> at;
  for (const auto& r : records) {
    if (r.compile_status) ++attempted;
    if (r.compile_status == CompileStatus::ok && !r.repair_outcome) ++first;
    if (r.repair_outcome && r.repair_outcome->kind == RepairStatus::Kind::failed) ++failed;
    if (r.repair_outcome && r.repair_outcome->kind == RepairStatus::Kind::repaired) ++at[r.repair_outcome->iteration];
    if (r.description) ++described;
  }
  EXPECT_EQ(s.total, 700u);
  EXPECT_EQ(s.compile_attempted, attempted);
  EXPECT_EQ(s.first_pass_ok, first);
  EXPECT_EQ(s.repair_failed, failed);
  EXPECT_EQ(s.repaired_at, at);
  EXPECT_EQ(s.described, described);
  double share_sum = 0;
  for (const auto& [_, v] : s.license_shares) share_sum += v;
  EXPECT_NEAR(share_sum, 1.0, 1e-12);
}

TEST(DatasetStore, ReportedCorpusProportions) {
  // 313 of 1000 compile first time; licence mix 3555 / 4003 / 2442 of 10000.
  std::vector<TikZRecord> records;
  for (std::size_t i = 0; i < 10000; ++i) {
    TikZRecord r;
    r.record_id = std::to_string(i);
    r.license = i < 3555 ? LicenseClass::permissive_cc
                         : i < 7558 ? LicenseClass::nonexclusive_dist : LicenseClass::unknown;
    if (i < 1000) {
      r.compile_status = i < 313 ? CompileStatus::ok : CompileStatus::compile_error;
    }
    records.push_back(std::move(r));
  }
  const auto s = corpus_stats(records);
  EXPECT_NEAR(s.first_pass_rate, 0.313, 1e-12);
  EXPECT_NEAR(s.license_shares.at("permissive_cc"), 0.3555, 1e-12);
  EXPECT_NEAR(s.license_shares.at("nonexclusive_dist"), 0.4003, 1e-12);
  EXPECT_NEAR(s.license_shares.at("unknown"), 0.2442, 1e-12);
  EXPECT_TRUE(redistributable(LicenseClass::permissive_cc));
  EXPECT_FALSE(redistributable(LicenseClass::nonexclusive_dist));
  EXPECT_FALSE(redistributable(LicenseClass::unknown));
}

TEST(DatasetStore, EmptyStore) {
  ScratchDir dir("store-empty");
  const auto receipt = write_records({}, dir.path() / "e.jsonl");
  EXPECT_EQ(receipt.count, 0u);
  EXPECT_TRUE(read_records(dir.path() / "e.jsonl").records.empty());
  const auto s = corpus_stats({});
  EXPECT_EQ(s.total, 0u);
  EXPECT_EQ(s.first_pass_rate, 0.0);
  EXPECT_FALSE(lookup_record(dir.path() / "e.jsonl", "x"));
}

TEST(DatasetStore, MalformedLines) {
  ScratchDir dir("store-bad");
  std::mt19937_64 rng(7);
  write_records({make(0, rng), make(1, rng)}, dir.path() / "r.jsonl");
  {
    std::ofstream f(dir.path() / "r.jsonl", std::ios::app);
    f << "{not json\n";
  }
  const auto lenient = read_records(dir.path() / "r.jsonl", false);
  EXPECT_EQ(lenient.records.size(), 2u);
  ASSERT_EQ(lenient.diagnostics.size(), 1u);
  EXPECT_EQ(lenient.diagnostics[0].line, 3u);
  try {
    read_records(dir.path() / "r.jsonl", true);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(DatasetStore, IndexLookupAndStaleFallback) {
  ScratchDir dir("store-idx");
  std::mt19937_64 rng(8);
  std::vector<TikZRecord> records;
  for (std::size_t i = 0; i < 50; ++i) records.push_back(make(i, rng));
  const auto path = dir.path() / "r.jsonl";
  write_records(records, path);
  EXPECT_EQ(lookup_record(path, "rec-17"), records[17]);
  EXPECT_FALSE(lookup_record(path, "rec-999"));
  // Garble the index: lookup still succeeds by scanning.
  {
    std::ofstream f(path.string() + ".idx", std::ios::trunc);
    f << "{\"rec-17\": 3}\n";
  }
  EXPECT_EQ(lookup_record(path, "rec-17"), records[17]);
}

TEST(DatasetStore, UnknownFieldsPreserved) {
  std::mt19937_64 rng(9);
  auto j = to_json(make(3, rng));
  j["x_reviewer"] = {{"name", "q"}};
  const auto r = record_from_json(j);
  EXPECT_EQ(r.extra.at("x_reviewer").at("name"), "q");
  EXPECT_EQ(to_json(r), j);
}

TEST(DatasetStore, Invariants) {
  ScratchDir dir("store-inv");
  TikZRecord r;
  r.record_id = "t";
  r.split = Split::test;
  EXPECT_EQ(record_violations(r).size(), 2u);
  EXPECT_THROW(write_records({r}, dir.path() / "x.jsonl"), InputError);
  TikZRecord a, b;
  a.record_id = b.record_id = "dup";
  EXPECT_THROW(write_records({a, b}, dir.path() / "y.jsonl"), InputError);
  EXPECT_EQ(parse_repair_status(to_string(RepairStatus::repaired_at(2))), RepairStatus::repaired_at(2));
  EXPECT_THROW(parse_repair_status("repaired_at(0)"), InputError);
  auto v2 = a.next_version("compile", {{"status", "ok"}});
  EXPECT_EQ(v2.stage_history.size(), 1u);
  EXPECT_EQ(v2.stage_history[0]["stage"], "compile");
}
