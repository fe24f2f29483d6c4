#include "tikzkit/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tikzkit/errors.hpp"
#include "tikzkit/text.hpp"

namespace tikzkit {

PatchEmbeddingSet::PatchEmbeddingSet(std::size_t count, std::size_t dim, std::vector<double> values)
    : count_(count), dim_(dim), values_(std::move(values)) {
  if (count_ == 0 || dim_ == 0) throw InputError("patch embedding set must be non-empty");
  if (values_.size() != count_ * dim_) {
    throw InputError("patch embedding set has " + std::to_string(values_.size()) +
                     " values, expected " + std::to_string(count_ * dim_));
  }
  for (std::size_t i = 0; i < count_; ++i) {
    double norm2 = 0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double v = values_[i * dim_ + k];
      if (!std::isfinite(v)) throw InputError("patch " + std::to_string(i) + " has a non-finite entry");
      norm2 += v * v;
    }
    if (norm2 == 0.0) throw InputError("patch " + std::to_string(i) + " is the zero vector");
  }
}

PatchEmbeddingSet PatchEmbeddingSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("patch embedding set must be non-empty");
  const std::size_t dim = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw InputError("patch vectors differ in dimension");
    values.insert(values.end(), r.begin(), r.end());
  }
  return PatchEmbeddingSet(rows.size(), dim, std::move(values));
}

Matrix cosine_distance_matrix(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y) {
  if (x.dim() != y.dim()) {
    throw InputError("embedding dimensions differ: " + std::to_string(x.dim()) + " vs " +
                     std::to_string(y.dim()));
  }
  const std::size_t d = x.dim();
  auto norms = [d](const PatchEmbeddingSet& s) {
    std::vector<double> out(s.count());
    for (std::size_t i = 0; i < s.count(); ++i) {
      double acc = 0;
      for (std::size_t k = 0; k < d; ++k) acc += s.row(i)[k] * s.row(i)[k];
      out[i] = std::sqrt(acc);
    }
    return out;
  };
  const auto nx = norms(x);
  const auto ny = norms(y);
  Matrix out(x.count(), y.count());
  for (std::size_t i = 0; i < x.count(); ++i) {
    for (std::size_t j = 0; j < y.count(); ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += x.row(i)[k] * y.row(j)[k];
      out(i, j) = std::clamp(1.0 - dot / (nx[i] * ny[j]), 0.0, 2.0);
    }
  }
  return out;
}

namespace {

void check_cost_matrix(const Matrix& d) {
  if (d.rows == 0 || d.cols == 0 || d.data.size() != d.rows * d.cols) {
    throw InputError("distance matrix must be non-empty and well-formed");
  }
  for (double v : d.data) {
    if (!std::isfinite(v)) throw InputError("distance matrix has a non-finite entry");
    if (v < 0) throw InputError("distance matrix has a negative entry");
  }
}

double plan_cost(const Matrix& f, const Matrix& d) {
  double c = 0;
  for (std::size_t k = 0; k < d.data.size(); ++k) c += f.data[k] * d.data[k];
  return c;
}

}  // namespace

TransportPlan solve_emd(const Matrix& d) {
  check_cost_matrix(d);
  const std::size_t m = d.rows;
  const std::size_t n = d.cols;
  TransportPlan plan;
  plan.flow = Matrix(m, n);
  if (m == 1 || n == 1) {
    // Every unit of mass has exactly one destination (or source).
    const double w = 1.0 / static_cast<double>(m * n);
    std::fill(plan.flow.data.begin(), plan.flow.data.end(), w);
    plan.cost = plan_cost(plan.flow, d);
    return plan;
  }

  using i64 = long long;
  const i64 total = std::lcm(static_cast<i64>(m), static_cast<i64>(n));
  std::vector<i64> supply(m, total / static_cast<i64>(m));
  std::vector<i64> demand(n, total / static_cast<i64>(n));
  std::vector<i64> flow(m * n, 0);
  // Potentials keep reduced costs D(i,j) + hr[i] - hc[j] non-negative.
  std::vector<double> hr(m, 0.0), hc(n, 0.0);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> dr(m), dc(n);
  std::vector<char> done_r(m), done_c(n);
  std::vector<std::ptrdiff_t> prev_row_of_col(n), prev_col_of_row(m);

  i64 remaining = total;
  while (remaining > 0) {
    std::fill(dr.begin(), dr.end(), kInf);
    std::fill(dc.begin(), dc.end(), kInf);
    std::fill(done_r.begin(), done_r.end(), 0);
    std::fill(done_c.begin(), done_c.end(), 0);
    std::fill(prev_col_of_row.begin(), prev_col_of_row.end(), -1);
    std::fill(prev_row_of_col.begin(), prev_row_of_col.end(), -1);
    for (std::size_t i = 0; i < m; ++i) {
      if (supply[i] > 0) dr[i] = 0.0;
    }

    std::ptrdiff_t target = -1;
    while (true) {
      double best = kInf;
      std::ptrdiff_t best_r = -1, best_c = -1;
      for (std::size_t i = 0; i < m; ++i) {
        if (!done_r[i] && dr[i] < best) {
          best = dr[i];
          best_r = static_cast<std::ptrdiff_t>(i);
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!done_c[j] && dc[j] < best) {
          best = dc[j];
          best_c = static_cast<std::ptrdiff_t>(j);
          best_r = -1;
        }
      }
      if (best == kInf) break;
      if (best_c >= 0) {
        const auto j = static_cast<std::size_t>(best_c);
        done_c[j] = 1;
        if (demand[j] > 0) {
          target = best_c;
          break;
        }
        for (std::size_t i = 0; i < m; ++i) {
          if (done_r[i] || flow[i * n + j] == 0) continue;
          const double nd = dc[j] - d(i, j) + hc[j] - hr[i];
          if (nd < dr[i]) {
            dr[i] = nd;
            prev_col_of_row[i] = best_c;
          }
        }
      } else {
        const auto i = static_cast<std::size_t>(best_r);
        done_r[i] = 1;
        for (std::size_t j = 0; j < n; ++j) {
          if (done_c[j]) continue;
          const double nd = dr[i] + d(i, j) + hr[i] - hc[j];
          if (nd < dc[j]) {
            dc[j] = nd;
            prev_row_of_col[j] = best_r;
          }
        }
      }
    }
    if (target < 0) throw Error("transportation solver found no augmenting path");

    const double dt = dc[static_cast<std::size_t>(target)];
    for (std::size_t i = 0; i < m; ++i) hr[i] += std::min(dr[i], dt);
    for (std::size_t j = 0; j < n; ++j) hc[j] += std::min(dc[j], dt);

    // Walk back to the source row, collecting the bottleneck.
    i64 delta = demand[static_cast<std::size_t>(target)];
    std::size_t j = static_cast<std::size_t>(target);
    std::size_t start_row = 0;
    while (true) {
      const auto i = static_cast<std::size_t>(prev_row_of_col[j]);
      const auto back = prev_col_of_row[i];
      if (back < 0) {
        start_row = i;
        break;
      }
      const auto jp = static_cast<std::size_t>(back);
      delta = std::min(delta, flow[i * n + jp]);
      j = jp;
    }
    delta = std::min(delta, supply[start_row]);

    j = static_cast<std::size_t>(target);
    while (true) {
      const auto i = static_cast<std::size_t>(prev_row_of_col[j]);
      flow[i * n + j] += delta;
      const auto back = prev_col_of_row[i];
      if (back < 0) break;
      const auto jp = static_cast<std::size_t>(back);
      flow[i * n + jp] -= delta;
      j = jp;
    }
    supply[start_row] -= delta;
    demand[static_cast<std::size_t>(target)] -= delta;
    remaining -= delta;
  }

  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t k = 0; k < flow.size(); ++k) plan.flow.data[k] = static_cast<double>(flow[k]) * scale;
  plan.cost = plan_cost(plan.flow, d);
  return plan;
}

TransportPlan solve_emd_entropic(const Matrix& d, const EntropicOptions& opt) {
  check_cost_matrix(d);
  if (!(opt.epsilon > 0)) throw InputError("entropic epsilon must be > 0");
  const std::size_t m = d.rows;
  const std::size_t n = d.cols;
  const double a = 1.0 / static_cast<double>(m);
  const double b = 1.0 / static_cast<double>(n);
  const double eps = opt.epsilon;
  std::vector<double> f(m, 0.0), g(n, 0.0), buf(std::max(m, n));

  auto lse = [&](std::size_t len) {
    const double mx = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(len));
    double s = 0;
    for (std::size_t k = 0; k < len; ++k) s += std::exp(buf[k] - mx);
    return mx + std::log(s);
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) buf[j] = (g[j] - d(i, j)) / eps;
      f[i] = eps * (std::log(a) - lse(n));
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < m; ++i) buf[i] = (f[i] - d(i, j)) / eps;
      g[j] = eps * (std::log(b) - lse(m));
    }
    double err = 0;
    for (std::size_t i = 0; i < m; ++i) {
      double r = 0;
      for (std::size_t j = 0; j < n; ++j) r += std::exp((f[i] + g[j] - d(i, j)) / eps);
      err += std::abs(r - a);
    }
    if (err < opt.tolerance) break;
  }

  TransportPlan plan;
  plan.flow = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) plan.flow(i, j) = std::exp((f[i] + g[j] - d(i, j)) / eps);
  }
  // Round onto the transportation polytope: shrink rows, shrink columns,
  // then add the rank-one correction.
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < n; ++j) r += plan.flow(i, j);
    const double s = r > a ? a / r : 1.0;
    for (std::size_t j = 0; j < n; ++j) plan.flow(i, j) *= s;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0;
    for (std::size_t i = 0; i < m; ++i) c += plan.flow(i, j);
    const double s = c > b ? b / c : 1.0;
    for (std::size_t i = 0; i < m; ++i) plan.flow(i, j) *= s;
  }
  std::vector<double> er(m), ec(n);
  double ec_sum = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < n; ++j) r += plan.flow(i, j);
    er[i] = a - r;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0;
    for (std::size_t i = 0; i < m; ++i) c += plan.flow(i, j);
    ec[j] = b - c;
    ec_sum += ec[j];
  }
  if (ec_sum > 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) plan.flow(i, j) += er[i] * ec[j] / ec_sum;
    }
  }
  plan.cost = plan_cost(plan.flow, d);
  return plan;
}

std::string_view to_string(EmdSolver s) {
  return s == EmdSolver::exact_transportation ? "exact_transportation" : "entropic_approximation";
}

EmdSolver parse_emd_solver(std::string_view s) {
  if (s == "exact_transportation") return EmdSolver::exact_transportation;
  if (s == "entropic_approximation") return EmdSolver::entropic_approximation;
  throw InputError("unknown solver '" + std::string(s) + "'");
}

void RewardConfig::validate() const {
  if (solver == EmdSolver::entropic_approximation && !(entropic_epsilon > 0)) {
    throw ConfigError("reward.entropic_epsilon must be > 0 for the entropic solver");
  }
}

Json to_json(const RewardConfig& c) {
  return Json{{"clamp_to_unit", c.clamp_to_unit},
              {"solver", to_string(c.solver)},
              {"entropic_epsilon", c.entropic_epsilon}};
}

RewardConfig reward_config_from_json(const Json& j) {
  RewardConfig c;
  c.clamp_to_unit = j.value("clamp_to_unit", c.clamp_to_unit);
  if (j.contains("solver")) c.solver = parse_emd_solver(j["solver"].get<std::string>());
  c.entropic_epsilon = j.value("entropic_epsilon", c.entropic_epsilon);
  return c;
}

Similarity similarity(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y,
                      const RewardConfig& config) {
  config.validate();
  const auto d = cosine_distance_matrix(x, y);
  const auto plan = config.solver == EmdSolver::exact_transportation
                        ? solve_emd(d)
                        : solve_emd_entropic(d, EntropicOptions{config.entropic_epsilon});
  const double mass = std::accumulate(plan.flow.data.begin(), plan.flow.data.end(), 0.0);
  Similarity s;
  s.cost = plan.cost;
  s.raw = 1.0 - plan.cost / mass;
  s.reward = config.clamp_to_unit ? std::clamp(s.raw, 0.0, 1.0) : s.raw;
  return s;
}

double similarity_reward(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y,
                         const RewardConfig& config) {
  return similarity(x, y, config).reward;
}

int format_reward(std::string_view code) {
  const auto body = trim(code);
  if (!body.starts_with(kStandaloneClassLine)) return 0;
  if (!body.ends_with(kEndDocument)) return 0;
  const auto begin = body.find(kBeginDocument, kStandaloneClassLine.size());
  if (begin == std::string_view::npos) return 0;
  return begin + kBeginDocument.size() <= body.size() - kEndDocument.size() ? 1 : 0;
}

Json to_json(const RolloutScore& s) {
  return Json{{"reward", s.reward},
              {"raw", s.raw},
              {"format", s.format},
              {"compile_status",
               s.compile_status ? Json(std::string(to_string(*s.compile_status))) : Json(nullptr)},
              {"scored", s.scored},
              {"provider", s.provider},
              {"dim", s.dim},
              {"error", s.error}};
}

RolloutScore rollout_reward(std::string_view code, const PatchEmbeddingSet& gt,
                            EmbeddingProvider& provider, ProgramCompiler& compiler,
                            const RewardConfig& config) {
  RolloutScore s;
  s.provider = provider.identity();
  s.format = format_reward(code);
  if (s.format == 0) return s;
  const auto program = program_from_document("rollout", std::string(code));
  const auto compiled = compiler.compile(program);
  s.compile_status = compiled.status;
  if (compiled.status != CompileStatus::ok || !compiled.artifact_path) return s;
  const auto emb = provider.embed(*compiled.artifact_path);
  s.dim = emb.dim();
  const auto sim = similarity(emb, gt, config);
  s.raw = sim.raw;
  s.reward = sim.reward;
  return s;
}

std::vector<RolloutScore> score_rollouts(const std::vector<std::string>& codes,
                                         const PatchEmbeddingSet& gt,
                                         EmbeddingProvider& provider, ProgramCompiler& compiler,
                                         const RewardConfig& config) {
  std::vector<RolloutScore> out;
  out.reserve(codes.size());
  for (const auto& c : codes) {
    try {
      out.push_back(rollout_reward(c, gt, provider, compiler, config));
    } catch (const InfrastructureError& e) {
      RolloutScore s;
      s.scored = false;
      s.provider = provider.identity();
      s.error = e.what();
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace tikzkit
