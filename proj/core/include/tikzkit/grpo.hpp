#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tikzkit/jsonl.hpp"

namespace tikzkit {

struct Rollout {
  std::vector<double> logp_new;  // per token, under the current policy
  std::vector<double> logp_old;  // per token, under the sampling policy
  std::optional<std::vector<double>> logp_ref;
  double reward = 0.0;
  bool truncated = false;

  std::size_t token_count() const { return logp_new.size(); }
};

struct GrpoConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta = 0.0;
  std::size_t max_completion_length = 2048;  // L
  bool scale_by_std = false;
  bool mask_truncated = true;

  void validate() const;
};

Json to_json(const GrpoConfig& c);
GrpoConfig grpo_config_from_json(const Json& j);

struct GroupResult {
  std::vector<double> advantages;
  double objective = 0.0;
  double kl_penalty = 0.0;  // beta-weighted KL part already subtracted
  std::vector<std::vector<double>> per_token_terms;  // clipped terms, 0 when masked
};

// A_i = r_i - mean(r), divided by the population std when scale_by_std
// (zero std gives all-zero advantages). InputError when G < 2.
std::vector<double> group_advantages(const std::vector<double>& rewards, bool scale_by_std);

// min(rho A, clip(rho, 1 - eps_low, 1 + eps_high) A), rho = exp(new - old).
double clipped_token_term(double logp_new, double logp_old, double advantage,
                          const GrpoConfig& config);

// J = 1/(L G) sum_i sum_t term(i, t) - beta/(L G) sum_i sum_t k3(i, t).
// Truncated rollouts stay in G and the baseline but add no terms when
// mask_truncated. Throws ConfigError for beta > 0 without logp_ref and
// InputError for malformed groups.
GroupResult grpo_objective(const std::vector<Rollout>& group, const GrpoConfig& config);

// dJ / d logp_new, same shape as the logp_new vectors.
std::vector<std::vector<double>> grpo_gradient(const std::vector<Rollout>& group,
                                               const GrpoConfig& config);

}  // namespace tikzkit
