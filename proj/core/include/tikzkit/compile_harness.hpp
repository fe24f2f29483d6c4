#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tikzkit/artifact_cache.hpp"
#include "tikzkit/jsonl.hpp"
#include "tikzkit/normalize.hpp"

namespace tikzkit {

enum class CompileStatus { ok, compile_error, timeout, empty_output, corrupted_output };

std::string_view to_string(CompileStatus s);
CompileStatus parse_compile_status(std::string_view s);

struct CompileResult {
  std::string record_id;
  CompileStatus status = CompileStatus::compile_error;
  std::string log_text;
  std::int64_t duration_ms = 0;
  std::optional<std::filesystem::path> artifact_path;
  bool cache_hit = false;  // not part of the persisted schema identity
};

// with_timing=false drops duration_ms so outputs are reproducible.
Json to_json(const CompileResult& r, bool with_timing = true);
CompileResult compile_result_from_json(const Json& j);

// Environment variables that override argv[0] of the respective command.
inline constexpr const char* kCompilerEnvVar = "TIKZKIT_COMPILER";
inline constexpr const char* kRasterizerEnvVar = "TIKZKIT_RASTERIZER";

struct SandboxConfig {
  // Placeholders: {input} (main.tex), {jobname} (main).
  std::vector<std::string> compiler_command = {
      "pdflatex", "-interaction=nonstopmode", "-halt-on-error", "-no-shell-escape", "{input}"};
  // Placeholders: {pdf} (main.pdf), {output_stem} (render), {output}
  // (render.png), {dpi}. Must leave a PNG at {output}.
  std::vector<std::string> render_command = {
      "pdftoppm", "-r", "{dpi}", "-png", "-singlefile", "{pdf}", "{output_stem}"};
  double timeout_s = 60.0;
  double render_timeout_s = 30.0;
  int render_dpi = 300;
  std::size_t max_log_bytes = 16 * 1024;
  int blank_epsilon = 8;
  std::filesystem::path work_root = std::filesystem::temp_directory_path();
  // Rendered PNGs and cached results live here, keyed by content hash.
  std::filesystem::path artifact_dir = std::filesystem::temp_directory_path() / "tikzkit-artifacts";
  bool use_cache = true;

  // Throws ConfigError listing every violation.
  void validate() const;
  // Command vectors after environment-variable overrides.
  std::vector<std::string> resolved_compiler() const;
  std::vector<std::string> resolved_renderer() const;
  // Identifies settings that change compile outcomes (part of cache keys).
  std::string fingerprint() const;
};

Json to_json(const SandboxConfig& c);
SandboxConfig sandbox_config_from_json(const Json& j);

// Anything that turns a program into a CompileResult. The repair loop and
// the reward composition depend on this seam, not on a concrete compiler.
class ProgramCompiler {
 public:
  virtual ~ProgramCompiler() = default;
  virtual CompileResult compile(const NormalizedProgram& program) = 0;
};

// Runs the configured TeX engine and rasterizer in a fresh temporary
// directory per job. Results are cached on disk by (content hash, config
// fingerprint). Thread-safe.
class SandboxCompiler : public ProgramCompiler {
 public:
  explicit SandboxCompiler(SandboxConfig config);

  // Throws EnvironmentError when the compiler or rasterizer is missing and
  // InfrastructureError on filesystem failures.
  CompileResult compile(const NormalizedProgram& program) override;

  const SandboxConfig& config() const { return config_; }
  std::size_t cache_hits() const;
  std::size_t cache_misses() const;

 private:
  CompileResult compile_uncached(const NormalizedProgram& program, const std::string& key);

  SandboxConfig config_;
  std::unique_ptr<ArtifactCache> cache_;
};

// Compiles every program on a bounded worker pool; results keep input order.
std::vector<CompileResult> compile_all(ProgramCompiler& compiler,
                                       const std::vector<NormalizedProgram>& programs,
                                       std::size_t jobs);

// Fraction of results with status ok. Throws InputError on an empty list.
double compilation_rate(const std::vector<CompileResult>& results);

// Wraps an already complete document (e.g. an LLM candidate) as a program.
NormalizedProgram program_from_document(std::string record_id, std::string code);

}  // namespace tikzkit
