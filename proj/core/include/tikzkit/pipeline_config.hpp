#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tikzkit/chat_client.hpp"
#include "tikzkit/compile_harness.hpp"
#include "tikzkit/corpus_extract.hpp"
#include "tikzkit/decontaminate.hpp"
#include "tikzkit/grpo.hpp"
#include "tikzkit/jsonl.hpp"
#include "tikzkit/llm_repair.hpp"
#include "tikzkit/reward.hpp"
#include "tikzkit/vlm_describe.hpp"

namespace tikzkit {

struct EmbeddingProviderConfig {
  std::string kind = "raster_patch";  // raster_patch | file_exchange | http
  int grid = 4;                        // raster_patch
  std::vector<std::string> command;    // file_exchange
  std::string url;                     // http
  double timeout_s = 120.0;
};

struct EndpointSection {
  ChatEndpointConfig endpoint;
  // Mock mode replays this transcript when it exists; live mode appends
  // every exchange to it.
  std::optional<std::filesystem::path> transcript;
};

struct PipelineConfig {
  std::filesystem::path input;  // directory tree or JSONL document manifest
  // Metadata applied to documents loaded from a directory tree.
  SourceKind tree_source_kind = SourceKind::github;
  LicenseClass tree_license = LicenseClass::unknown;
  std::filesystem::path output_dir = "tikzkit-out";
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  bool mock_endpoints = false;
  std::optional<std::filesystem::path> rules_file;
  std::size_t min_body_chars = 100;
  std::size_t max_body_chars = 4000;
  // Stages run by `all`; absent entries default to enabled.
  std::map<std::string, bool> stages;

  SandboxConfig sandbox;
  bool sandbox_artifact_dir_set = false;
  EndpointSection repair_endpoint;
  EndpointSection describe_endpoint;
  RepairConfig repair;
  DescribeConfig describe;
  SplitPolicy split;
  RewardConfig reward;
  EmbeddingProviderConfig embedding;
  GrpoConfig grpo;
  std::optional<std::filesystem::path> grpo_input;
  std::string metric_m1 = "CLIP";
  std::string metric_m2 = "DSim";
  std::optional<std::filesystem::path> scores_file;
  std::optional<std::filesystem::path> predictions_file;

  bool stage_enabled(const std::string& stage) const;
  // Throws ConfigError listing every violation. check_paths also requires
  // referenced input files to exist. require_input can be lifted for stages
  // that only read from output_dir.
  void validate(bool check_paths = true, bool require_input = true) const;
};

// Relative paths are resolved against base_dir. Unknown top-level keys are
// violations.
PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
Json to_json(const PipelineConfig& c);

}  // namespace tikzkit
