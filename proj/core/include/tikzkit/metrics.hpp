#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/jsonl.hpp"

namespace tikzkit {

// Levenshtein distance over token sequences (unit costs).
std::size_t token_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);

// Edit distance of the whitespace-free lexeme sequences divided by the
// longer length; 0 when both are empty.
double ted(std::string_view a, std::string_view b);

struct TokenCounter {
  std::string name;
  std::function<std::size_t(std::string_view)> count;
};

// Counts significant lexer tokens.
TokenCounter lexer_token_counter();

// Mean of counter over outputs. InputError on an empty list.
double avg_tokens(const std::vector<std::string>& outputs, const TokenCounter& counter);

// Mean of the two external scores and 1 - mean TED.
double avg_score(double m1, double m2, double mean_ted);

struct SampleInput {
  std::string record_id;
  std::optional<std::string> output;  // absent: generation failed
  std::string reference;
  bool compiled = false;
  std::map<std::string, double> external_scores;
};

struct SampleMetrics {
  std::string record_id;
  double ted = 1.0;
  bool compiled = false;
  bool missing_output = false;
  std::size_t token_count = 0;
  std::map<std::string, double> external_scores;
};

struct MetricConfig {
  std::string m1 = "CLIP";
  std::string m2 = "DSim";
  TokenCounter counter = lexer_token_counter();
};

struct MetricReport {
  std::vector<SampleMetrics> per_sample;
  double cr = 0.0;
  std::optional<double> at;  // absent when every output is missing
  double mean_ted = 0.0;
  std::optional<double> mean_m1;
  std::optional<double> mean_m2;
  std::optional<double> avg;
  std::vector<std::string> notes;  // why anything above is missing
  std::string m1_name;
  std::string m2_name;
  std::string counter_name;
};

// Missing outputs score TED = 1, compiled = false and are left out of AT.
// AVG is omitted (with a note) unless every sample carries both configured
// external scores. InputError on an empty sample list.
MetricReport aggregate(const std::vector<SampleInput>& samples, const MetricConfig& config);

// Rebuilds the aggregates from per-sample rows.
MetricReport aggregate_rows(std::vector<SampleMetrics> rows, const MetricConfig& config);

Json to_json(const MetricReport& r);
std::string render_table(const MetricReport& r);

// External score file: CSV with a record_id column plus named numeric
// columns, or JSONL rows {record_id, <name>: number, ...}.
std::map<std::string, std::map<std::string, double>> load_external_scores(
    const std::filesystem::path& path);

}  // namespace tikzkit
