#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tikzkit/compile_harness.hpp"
#include "tikzkit/jsonl.hpp"

namespace tikzkit {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Ordered set of patch vectors of one dimension. Construction rejects empty
// sets, ragged rows, non-finite entries and zero vectors (InputError).
class PatchEmbeddingSet {
 public:
  PatchEmbeddingSet(std::size_t count, std::size_t dim, std::vector<double> values);
  static PatchEmbeddingSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  const double* row(std::size_t i) const { return values_.data() + i * dim_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t count_;
  std::size_t dim_;
  std::vector<double> values_;
};

// D[i][j] = 1 - cos(x_i, y_j), clamped into [0, 2] against rounding.
Matrix cosine_distance_matrix(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y);

struct TransportPlan {
  Matrix flow;  // rows sum to 1/|x|, columns to 1/|y|
  double cost = 0.0;
};

// Exact optimum under uniform marginals: min-cost flow with integer
// supplies lcm(m,n)/m per row and lcm(m,n)/n per column, solved by
// successive shortest paths. InputError on empty, negative or non-finite D.
TransportPlan solve_emd(const Matrix& d);

struct EntropicOptions {
  double epsilon = 0.01;
  int max_iterations = 5000;
  double tolerance = 1e-10;
};

// Log-domain Sinkhorn followed by rounding onto the exact marginals, so the
// plan is always feasible; its cost upper-bounds the exact optimum.
TransportPlan solve_emd_entropic(const Matrix& d, const EntropicOptions& options = {});

enum class EmdSolver { exact_transportation, entropic_approximation };
std::string_view to_string(EmdSolver s);
EmdSolver parse_emd_solver(std::string_view s);

struct RewardConfig {
  bool clamp_to_unit = true;
  EmdSolver solver = EmdSolver::exact_transportation;
  double entropic_epsilon = 0.01;

  void validate() const;
};

Json to_json(const RewardConfig& c);
RewardConfig reward_config_from_json(const Json& j);

struct Similarity {
  double raw = 0.0;     // 1 - cost / total flow, in [-1, 1]
  double reward = 0.0;  // raw, clipped to [0, 1] when clamping
  double cost = 0.0;
};

Similarity similarity(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y,
                      const RewardConfig& config);
double similarity_reward(const PatchEmbeddingSet& x, const PatchEmbeddingSet& y,
                         const RewardConfig& config);

// 1 iff the first non-whitespace content is the standalone class line, a
// \begin{document} follows it, and the last non-whitespace content is
// \end{document}.
int format_reward(std::string_view code);

// Turns a rendered image into patch embeddings. Implementations must be
// shareable across threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Throws InfrastructureError when the provider fails.
  virtual PatchEmbeddingSet embed(const std::filesystem::path& image) = 0;
  virtual std::string identity() const = 0;
};

struct RolloutScore {
  double reward = 0.0;
  double raw = 0.0;
  int format = 0;
  std::optional<CompileStatus> compile_status;
  bool scored = true;
  std::string provider;
  std::size_t dim = 0;
  std::string error;
};

Json to_json(const RolloutScore& s);

// 0 for non-conforming or non-compiling code, otherwise the similarity
// between the rendered image's embeddings and gt. Provider failures
// propagate as InfrastructureError.
RolloutScore rollout_reward(std::string_view code, const PatchEmbeddingSet& gt,
                            EmbeddingProvider& provider, ProgramCompiler& compiler,
                            const RewardConfig& config);

// Batch form: provider failures mark the rollout unscored instead of
// throwing.
std::vector<RolloutScore> score_rollouts(const std::vector<std::string>& codes,
                                         const PatchEmbeddingSet& gt,
                                         EmbeddingProvider& provider, ProgramCompiler& compiler,
                                         const RewardConfig& config);

}  // namespace tikzkit
