#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tikzkit/grpo.hpp"

namespace tikzkit::testing {

// Random group whose ratios stay clear of both clip boundaries.
inline std::vector<Rollout> random_group(std::mt19937_64& rng, const GrpoConfig& cfg, bool with_ref) {
  std::uniform_int_distribution<int> gsize(2, 8);
  std::uniform_int_distribution<int> tsize(1, 16);
  std::uniform_real_distribution<double> old(-5.0, -0.6);
  std::uniform_real_distribution<double> delta(-0.4, 0.4);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  const double lo = std::log(1 - cfg.eps_low);
  const double hi = std::log(1 + cfg.eps_high);
  std::vector<Rollout> g(gsize(rng));
  for (auto& r : g) {
    const int t = tsize(rng);
    for (int k = 0; k < t; ++k) {
      double d;
      do {
        d = delta(rng);
      } while (std::abs(d - lo) < 1e-3 || std::abs(d - hi) < 1e-3);
      const double o = old(rng);
      r.logp_old.push_back(o);
      r.logp_new.push_back(o + d);
    }
    if (with_ref) {
      r.logp_ref.emplace();
      for (int k = 0; k < t; ++k) r.logp_ref->push_back(old(rng));
    }
    r.reward = reward(rng);
    r.truncated = rng() % 5 == 0;
  }
  return g;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& v) {
  std::vector<double> out;
  for (const auto& r : v) out.insert(out.end(), r.begin(), r.end());
  return out;
}

inline double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace tikzkit::testing
