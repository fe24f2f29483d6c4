#include "tikzkit/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "tikzkit/errors.hpp"

namespace tikzkit {

void GrpoConfig::validate() const {
  std::vector<std::string> v;
  if (!(eps_low > 0 && eps_low < 1)) v.emplace_back("grpo.eps_low must be in (0,1)");
  if (!(eps_high >= eps_low)) v.emplace_back("grpo.eps_high must be >= eps_low");
  if (!(beta >= 0)) v.emplace_back("grpo.beta must be >= 0");
  if (max_completion_length == 0) v.emplace_back("grpo.max_completion_length must be > 0");
  if (!v.empty()) throw ConfigError(std::move(v));
}

Json to_json(const GrpoConfig& c) {
  return Json{{"eps_low", c.eps_low},
              {"eps_high", c.eps_high},
              {"beta", c.beta},
              {"max_completion_length", c.max_completion_length},
              {"scale_by_std", c.scale_by_std},
              {"mask_truncated", c.mask_truncated}};
}

GrpoConfig grpo_config_from_json(const Json& j) {
  GrpoConfig c;
  c.eps_low = j.value("eps_low", c.eps_low);
  c.eps_high = j.value("eps_high", c.eps_high);
  c.beta = j.value("beta", c.beta);
  c.max_completion_length = j.value("max_completion_length", c.max_completion_length);
  c.scale_by_std = j.value("scale_by_std", c.scale_by_std);
  c.mask_truncated = j.value("mask_truncated", c.mask_truncated);
  return c;
}

std::vector<double> group_advantages(const std::vector<double>& rewards, bool scale_by_std) {
  if (rewards.size() < 2) throw InputError("a group needs at least 2 rewards");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw InputError("rewards must be finite");
  }
  // Equal rewards carry no signal; summing them can still round off the mean.
  if (std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) == rewards.end()) {
    return std::vector<double>(rewards.size(), 0.0);
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rewards[i] - mean;
  if (scale_by_std) {
    double var = 0;
    for (double x : a) var += x * x;
    const double sd = std::sqrt(var / n);
    if (sd == 0.0) {
      std::fill(a.begin(), a.end(), 0.0);
    } else {
      for (double& x : a) x /= sd;
    }
  }
  return a;
}

double clipped_token_term(double logp_new, double logp_old, double advantage,
                          const GrpoConfig& config) {
  const double rho = std::exp(logp_new - logp_old);
  const double clipped = std::clamp(rho, 1.0 - config.eps_low, 1.0 + config.eps_high);
  return std::min(rho * advantage, clipped * advantage);
}

namespace {

void check_group(const std::vector<Rollout>& group, const GrpoConfig& config) {
  config.validate();
  if (group.size() < 2) throw InputError("a group needs at least 2 rollouts");
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& r = group[i];
    const auto tag = "rollout " + std::to_string(i);
    if (r.logp_old.size() != r.logp_new.size()) throw InputError(tag + ": logp_old length differs");
    if (r.logp_ref && r.logp_ref->size() != r.logp_new.size()) {
      throw InputError(tag + ": logp_ref length differs");
    }
    if (r.token_count() > config.max_completion_length) {
      throw ConfigError(tag + " has " + std::to_string(r.token_count()) +
                        " tokens, more than max_completion_length");
    }
    auto check = [&](const std::vector<double>& v, const char* name) {
      for (double x : v) {
        if (!std::isfinite(x) || x > 0) throw InputError(tag + ": " + name + " entries must be finite and <= 0");
      }
    };
    check(r.logp_new, "logp_new");
    check(r.logp_old, "logp_old");
    if (r.logp_ref) check(*r.logp_ref, "logp_ref");
    if (config.beta > 0 && !r.logp_ref) {
      throw ConfigError(tag + ": beta > 0 requires logp_ref");
    }
  }
}

std::vector<double> rewards_of(const std::vector<Rollout>& group) {
  std::vector<double> r;
  r.reserve(group.size());
  for (const auto& x : group) r.push_back(x.reward);
  return r;
}

}  // namespace

GroupResult grpo_objective(const std::vector<Rollout>& group, const GrpoConfig& config) {
  check_group(group, config);
  GroupResult out;
  out.advantages = group_advantages(rewards_of(group), config.scale_by_std);
  const double norm =
      1.0 / (static_cast<double>(config.max_completion_length) * static_cast<double>(group.size()));
  double sum = 0, kl = 0;
  out.per_token_terms.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& r = group[i];
    auto& terms = out.per_token_terms[i];
    terms.assign(r.token_count(), 0.0);
    if (r.truncated && config.mask_truncated) continue;
    for (std::size_t t = 0; t < r.token_count(); ++t) {
      terms[t] = clipped_token_term(r.logp_new[t], r.logp_old[t], out.advantages[i], config);
      sum += terms[t];
      if (config.beta > 0) {
        const double diff = (*r.logp_ref)[t] - r.logp_new[t];
        kl += std::exp(diff) - diff - 1.0;
      }
    }
  }
  out.kl_penalty = config.beta * kl * norm;
  out.objective = sum * norm - out.kl_penalty;
  return out;
}

std::vector<std::vector<double>> grpo_gradient(const std::vector<Rollout>& group,
                                               const GrpoConfig& config) {
  check_group(group, config);
  const auto adv = group_advantages(rewards_of(group), config.scale_by_std);
  const double norm =
      1.0 / (static_cast<double>(config.max_completion_length) * static_cast<double>(group.size()));
  std::vector<std::vector<double>> grad(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& r = group[i];
    grad[i].assign(r.token_count(), 0.0);
    if (r.truncated && config.mask_truncated) continue;
    for (std::size_t t = 0; t < r.token_count(); ++t) {
      const double rho = std::exp(r.logp_new[t] - r.logp_old[t]);
      const double clipped = std::clamp(rho, 1.0 - config.eps_low, 1.0 + config.eps_high);
      // The unclipped branch is active when it is the smaller one (or the
      // clip does not bind); otherwise the term is locally constant.
      const bool unclipped = clipped == rho || rho * adv[i] < clipped * adv[i];
      double g = unclipped ? rho * adv[i] : 0.0;
      if (config.beta > 0) {
        const double diff = (*r.logp_ref)[t] - r.logp_new[t];
        g -= config.beta * (1.0 - std::exp(diff));
      }
      grad[i][t] = g * norm;
    }
  }
  return grad;
}

}  // namespace tikzkit
