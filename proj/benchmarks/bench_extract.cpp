#include <benchmark/benchmark.h>

#include <string>

#include "tikzkit/corpus_extract.hpp"
#include "tikzkit/normalize.hpp"

namespace {

tikzkit::SourceDocument document(int figures) {
  tikzkit::SourceDocument d;
  d.id = "bench";
  d.origin_key = "bench";
  d.raw_text = "\\documentclass{article}\n\\begin{document}\n";
  for (int i = 0; i < figures; ++i) {
    d.raw_text += "Text % comment \\begin{tikzpicture}\n\\begin{figure}\n\\begin{tikzpicture}\n";
    for (int k = 0; k < 10; ++k) d.raw_text += "\\draw (0,0) -- (" + std::to_string(k) + ",1); % c\n";
    d.raw_text += "\\end{tikzpicture}\n\\end{figure}\n";
  }
  d.raw_text += "\\end{document}\n";
  return d;
}

void BM_Extract(benchmark::State& state) {
  const auto doc = document(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tikzkit::extract_environments(doc));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * doc.raw_text.size()));
}
BENCHMARK(BM_Extract)->Range(1, 256);

void BM_Normalize(benchmark::State& state) {
  const auto doc = document(16);
  const auto snippets = tikzkit::extract_environments(doc).snippets;
  const auto rules = tikzkit::PackageRuleSet::defaults();
  for (auto _ : state) {
    for (const auto& s : snippets) benchmark::DoNotOptimize(tikzkit::normalize_snippet(s, rules));
  }
}
BENCHMARK(BM_Normalize);

}  // namespace

BENCHMARK_MAIN();
