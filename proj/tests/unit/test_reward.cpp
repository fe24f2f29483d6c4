#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tikzkit/embedding_provider.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/reward.hpp"

using namespace tikzkit;

namespace {

PatchEmbeddingSet random_set(std::mt19937_64& rng, std::size_t count, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(count, std::vector<double>(dim));
  for (auto& r : rows) {
    for (auto& v : r) v = g(rng);
  }
  return PatchEmbeddingSet::from_rows(rows);
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
  }
  return out;
}

PatchEmbeddingSet shuffled(const PatchEmbeddingSet& s, std::mt19937_64& rng) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.count(); ++i) rows.emplace_back(s.row(i), s.row(i) + s.dim());
  std::shuffle(rows.begin(), rows.end(), rng);
  return PatchEmbeddingSet::from_rows(rows);
}

const RewardConfig kDefault{};

}  // namespace

TEST(Emd, MatchesGenericLpOracle) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = 1 + rng() % 6;
    const std::size_t n = 1 + rng() % 6;
    const std::size_t d = 1 + rng() % 8;
    const auto D = cosine_distance_matrix(random_set(rng, m, d), random_set(rng, n, d));
    const auto plan = solve_emd(D);
    EXPECT_NEAR(plan.cost, oracle::transport_lp(to_rows(D)), 1e-9) << m << "x" << n;
  }
}

TEST(Emd, MatchesPermutationOracleOnSquareInstances) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 6;
    const auto D = cosine_distance_matrix(random_set(rng, n, 4), random_set(rng, n, 4));
    EXPECT_NEAR(solve_emd(D).cost, oracle::transport_permutations(to_rows(D)), 1e-9);
  }
}

TEST(Emd, PlanIsFeasible) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng() % 6;
    const std::size_t n = 1 + rng() % 6;
    const auto D = cosine_distance_matrix(random_set(rng, m, 3), random_set(rng, n, 3));
    const auto plan = solve_emd(D);
    double recomputed = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(plan.flow(i, j), -1e-15);
        row += plan.flow(i, j);
        recomputed += plan.flow(i, j) * D(i, j);
      }
      EXPECT_NEAR(row, 1.0 / static_cast<double>(m), 1e-12);
    }
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < m; ++i) col += plan.flow(i, j);
      EXPECT_NEAR(col, 1.0 / static_cast<double>(n), 1e-12);
    }
    EXPECT_NEAR(recomputed, plan.cost, 1e-12);
  }
}

TEST(Emd, DerivedTwoByTwoCase) {
  const auto x = PatchEmbeddingSet::from_rows({{1, 0}, {0, 1}});
  const auto y = PatchEmbeddingSet::from_rows({{1, 0}, {1, 0}});
  const auto D = cosine_distance_matrix(x, y);
  EXPECT_DOUBLE_EQ(solve_emd(D).cost, 0.5);
  EXPECT_DOUBLE_EQ(similarity_reward(x, y, kDefault), 0.5);
}

TEST(Emd, RejectsBadInput) {
  Matrix bad(2, 2, 0.0);
  bad(0, 1) = -1.0;
  EXPECT_THROW(solve_emd(bad), InputError);
  bad(0, 1) = NAN;
  EXPECT_THROW(solve_emd(bad), InputError);
  EXPECT_THROW(solve_emd(Matrix{}), InputError);
  EXPECT_THROW(PatchEmbeddingSet::from_rows({{0, 0}}), InputError);
  EXPECT_THROW(PatchEmbeddingSet::from_rows({{1, 0}, {1}}), InputError);
}

TEST(Emd, EntropicUpperBoundsAndApproachesExact) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto D = cosine_distance_matrix(random_set(rng, 1 + rng() % 6, 5), random_set(rng, 1 + rng() % 6, 5));
    const double exact = solve_emd(D).cost;
    const double approx = solve_emd_entropic(D, {0.005, 20000, 1e-12}).cost;
    EXPECT_GE(approx, exact - 1e-12);
    EXPECT_LE(approx - exact, 0.05);
  }
}

TEST(Similarity, Identities) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 8;
    const auto x = random_set(rng, 1 + rng() % 6, d);
    const auto y = random_set(rng, 1 + rng() % 6, d);
    EXPECT_NEAR(similarity_reward(x, x, kDefault), 1.0, 1e-9);
    EXPECT_NEAR(similarity_reward(x, y, kDefault), similarity_reward(y, x, kDefault), 1e-9);
    EXPECT_NEAR(similarity_reward(shuffled(x, rng), shuffled(y, rng), kDefault),
                similarity_reward(x, y, kDefault), 1e-9);
    const double r = similarity_reward(x, y, kDefault);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Similarity, ClampingOnlyAffectsNegativeRaw) {
  const auto x = PatchEmbeddingSet::from_rows({{1, 0}});
  const auto y = PatchEmbeddingSet::from_rows({{-1, 0}});
  RewardConfig unclamped;
  unclamped.clamp_to_unit = false;
  EXPECT_DOUBLE_EQ(similarity(x, y, unclamped).raw, -1.0);
  EXPECT_DOUBLE_EQ(similarity(x, y, unclamped).reward, -1.0);
  EXPECT_DOUBLE_EQ(similarity(x, y, kDefault).reward, 0.0);
}

TEST(FormatReward, Cases) {
  const std::string ok = tikzkit::testing::standalone("\\begin{tikzpicture}\\end{tikzpicture}");
  EXPECT_EQ(format_reward(ok), 1);
  EXPECT_EQ(format_reward("  \n" + ok + "\n\n"), 1);
  EXPECT_EQ(format_reward("Here you go:\n" + ok), 0);
  EXPECT_EQ(format_reward(ok + "Hope this helps"), 0);
  EXPECT_EQ(format_reward("\\documentclass{article}\n\\begin{document}\n\\end{document}"), 0);
  EXPECT_EQ(format_reward("\\documentclass[tikz]{standalone}\n\\end{document}"), 0);
  EXPECT_EQ(format_reward(""), 0);
}

namespace {

class FailingProvider : public EmbeddingProvider {
 public:
  PatchEmbeddingSet embed(const std::filesystem::path&) override {
    throw InfrastructureError("encoder offline");
  }
  std::string identity() const override { return "failing"; }
};

}  // namespace

TEST(RolloutReward, ComposesFormatCompileAndSimilarity) {
  tikzkit::testing::ScratchDir dir("rollout");
  SandboxCompiler compiler(tikzkit::testing::fake_sandbox(dir.path()));
  RasterPatchProvider provider(4);
  const std::string code = tikzkit::testing::standalone("\\begin{tikzpicture}\\draw (0,0) -- (2,3);\\end{tikzpicture}");
  const auto ref = compiler.compile(program_from_document("ref", code));
  ASSERT_EQ(ref.status, CompileStatus::ok);
  const auto gt = provider.embed(*ref.artifact_path);

  const auto self = rollout_reward(code, gt, provider, compiler, kDefault);
  EXPECT_NEAR(self.reward, 1.0, 1e-9);
  EXPECT_EQ(self.format, 1);

  const auto chatter = rollout_reward("Sure! " + code, gt, provider, compiler, kDefault);
  EXPECT_EQ(chatter.reward, 0.0);
  EXPECT_EQ(chatter.format, 0);
  EXPECT_FALSE(chatter.compile_status);

  const auto broken = rollout_reward(tikzkit::testing::standalone("\\bogus"), gt, provider, compiler, kDefault);
  EXPECT_EQ(broken.reward, 0.0);
  EXPECT_EQ(broken.compile_status, CompileStatus::compile_error);

  const auto other = rollout_reward(tikzkit::testing::standalone("\\begin{tikzpicture}\\node {z};\\end{tikzpicture}"),
                                    gt, provider, compiler, kDefault);
  EXPECT_GE(other.reward, 0.0);
  EXPECT_LT(other.reward, 1.0);
}

TEST(RolloutReward, ProviderFailurePropagatesOrMarksUnscored) {
  tikzkit::testing::ScratchDir dir("rollout-fail");
  SandboxCompiler compiler(tikzkit::testing::fake_sandbox(dir.path()));
  FailingProvider provider;
  const auto gt = PatchEmbeddingSet::from_rows({{1, 0}});
  const std::string code = tikzkit::testing::standalone("\\begin{tikzpicture}\\draw (0,0);\\end{tikzpicture}");
  EXPECT_THROW(rollout_reward(code, gt, provider, compiler, kDefault), InfrastructureError);
  const auto batch = score_rollouts({code, "junk"}, gt, provider, compiler, kDefault);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_FALSE(batch[0].scored);
  EXPECT_NE(batch[0].error.find("offline"), std::string::npos);
  EXPECT_TRUE(batch[1].scored);
  EXPECT_EQ(batch[1].reward, 0.0);
}

TEST(RewardConfig, JsonRoundTrip) {
  RewardConfig c;
  c.solver = EmdSolver::entropic_approximation;
  c.entropic_epsilon = 0.05;
  const auto back = reward_config_from_json(to_json(c));
  EXPECT_EQ(back.solver, c.solver);
  EXPECT_EQ(back.entropic_epsilon, 0.05);
  c.entropic_epsilon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
