#include <benchmark/benchmark.h>

#include <string>

#include "tikzkit/metrics.hpp"
#include "tikzkit/tex_lexer.hpp"

namespace {

std::string program(int lines, int salt) {
  std::string s = "\\documentclass[tikz]{standalone}\n\\begin{document}\n\\begin{tikzpicture}\n";
  for (int i = 0; i < lines; ++i) {
    s += "\\draw[thick, blue] (" + std::to_string(i) + "," + std::to_string((i * salt) % 7) +
         ") -- (" + std::to_string(i + 1) + ",2) node[above] {$x_" + std::to_string(i) + "$};\n";
  }
  return s + "\\end{tikzpicture}\n\\end{document}\n";
}

void BM_Tokenize(benchmark::State& state) {
  const auto code = program(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(tikzkit::tex_tokenize(code));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * code.size()));
}
BENCHMARK(BM_Tokenize)->Range(8, 512);

void BM_Ted(benchmark::State& state) {
  const auto a = program(static_cast<int>(state.range(0)), 3);
  const auto b = program(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(tikzkit::ted(a, b));
}
BENCHMARK(BM_Ted)->Range(8, 128);

}  // namespace

BENCHMARK_MAIN();
