#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/grpo.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

struct RolloutGroup {
  std::string group_id;
  std::vector<Rollout> rollouts;
};

struct GroupScore {
  std::string group_id;
  std::vector<double> advantages;
  double objective = 0.0;
  std::vector<std::vector<double>> gradients;
};

GroupScore score_group(const RolloutGroup& group, const GrpoConfig& config);

// JSONL: one group per line,
//   {"group_id", "rollouts": [{"logp_new", "logp_old", "logp_ref"|null,
//    "reward", "truncated"}]}
// and one score per line {"group_id", "advantages", "objective", "gradients"}.
Json to_json(const RolloutGroup& g);
RolloutGroup rollout_group_from_json(const Json& j);
Json to_json(const GroupScore& s);

// Binary interchange, all integers u32 and floats IEEE little-endian.
// Input ("TKZGRPO1"): u32 groups; per group u32 G; per rollout u32 T,
//   u32 flags (1 = truncated, 2 = has logp_ref), f64 reward, then T f32
//   logp_new, T f32 logp_old, and T f32 logp_ref when flagged.
// Output ("TKZGRPR1"): u32 groups; per group u32 G, f64 objective,
//   G f64 advantages, then per rollout u32 T and T f32 gradients.
// Binary groups get ids "0", "1", ... by position.
inline constexpr std::string_view kGrpoInputMagic = "TKZGRPO1";
inline constexpr std::string_view kGrpoOutputMagic = "TKZGRPR1";

std::string encode_rollout_groups(const std::vector<RolloutGroup>& groups);
std::vector<RolloutGroup> decode_rollout_groups(std::string_view bytes);
std::string encode_group_scores(const std::vector<GroupScore>& scores);
std::vector<GroupScore> decode_group_scores(std::string_view bytes);

// Dispatches on extension: .jsonl for JSONL, anything else binary.
std::vector<RolloutGroup> read_rollout_groups(const std::filesystem::path& path);
void write_rollout_groups(const std::filesystem::path& path, const std::vector<RolloutGroup>& groups);
void write_group_scores(const std::filesystem::path& path, const std::vector<GroupScore>& scores);

}  // namespace tikzkit
