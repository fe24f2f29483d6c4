#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/chat_client.hpp"
#include "tikzkit/compile_harness.hpp"
#include "tikzkit/jsonl.hpp"
#include "tikzkit/pipeline_config.hpp"
#include "tikzkit/reward.hpp"

namespace tikzkit {

struct StageReport {
  std::string stage;
  bool skipped = false;  // manifest showed inputs, config and outputs unchanged
  Json summary = Json::object();
  std::vector<std::filesystem::path> outputs;
};

Json to_json(const StageReport& r);

// Runs stages against one output directory. Each stage reads the previous
// stage's JSONL and writes its own files plus manifests/<stage>.json.
// Stage outputs never contain wall-clock data; timings go to timings/.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  // Seams for tests and embedding callers; defaults are built from config.
  void set_compiler(std::shared_ptr<ProgramCompiler> compiler);
  void set_repair_client(std::shared_ptr<ChatClient> client);
  void set_describe_client(std::shared_ptr<ChatClient> client);
  void set_embedding_provider(std::shared_ptr<EmbeddingProvider> provider);
  // Re-run stages even when their manifest is current.
  void set_force(bool force) { force_ = force; }

  // input overrides the stage's default input file.
  StageReport run(const std::string& stage,
                  const std::optional<std::filesystem::path>& input = std::nullopt);
  // Every enabled stage in order; grpo-score only when grpo_input is set.
  std::vector<StageReport> run_all();

  static const std::vector<std::string>& stage_order();
  std::filesystem::path out(std::string_view name) const;
  const PipelineConfig& config() const { return config_; }

 private:
  StageReport extract(const std::filesystem::path& input);
  StageReport normalize(const std::filesystem::path& input);
  StageReport compile(const std::filesystem::path& input);
  StageReport repair(const std::filesystem::path& input);
  StageReport describe_stage(const std::filesystem::path& input);
  StageReport split(const std::filesystem::path& input);
  StageReport reward(const std::filesystem::path& input);
  StageReport grpo_score(const std::filesystem::path& input);
  StageReport evaluate(const std::filesystem::path& input);
  StageReport stats(const std::filesystem::path& input);
  StageReport prompt(const std::filesystem::path& input);

  std::filesystem::path default_input(const std::string& stage) const;
  Json stage_config(const std::string& stage);
  std::vector<std::filesystem::path> extra_inputs(const std::string& stage) const;
  ProgramCompiler& compiler();
  ChatClient& repair_client();
  ChatClient& describe_client();
  EmbeddingProvider& provider();
  std::string relative_artifact(const std::optional<std::filesystem::path>& p) const;

  PipelineConfig config_;
  bool force_ = false;
  std::shared_ptr<ProgramCompiler> compiler_;
  std::shared_ptr<ChatClient> repair_client_;
  std::shared_ptr<ChatClient> describe_client_;
  std::shared_ptr<EmbeddingProvider> provider_;
};

}  // namespace tikzkit
