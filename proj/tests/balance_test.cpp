#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ega/balance.hpp"
#include "ega/error.hpp"
#include "oracles.hpp"

namespace {

namespace bal = ega::balance;
using ega::linalg::Matrix;

bal::GradientMatrix gm(const std::vector<std::vector<double>>& rows) {
  return bal::GradientMatrix(Matrix::from_rows(rows));
}

bal::LossHistory history_with(std::vector<std::vector<double>> per_epoch, int warm) {
  bal::LossHistory h(per_epoch.front().size(), warm);
  for (std::size_t e = 0; e < per_epoch.size(); ++e) h.record(static_cast<int>(e) + 1, per_epoch[e]);
  return h;
}

TEST(GradientMatrix, Invariants) {
  EXPECT_THROW(gm({{1, 2}}), ega::InvalidInput);
  EXPECT_THROW(gm({{1, INFINITY}, {0, 1}}), ega::InvalidInput);
  EXPECT_NO_THROW(gm({{1}, {2}}));
}

TEST(LossHistory, RejectsBadEntries) {
  bal::LossHistory h(2, 1);
  EXPECT_THROW(h.record(1, {1.0}), ega::InvalidInput);
  EXPECT_THROW(h.record(1, {1.0, -0.1}), ega::InvalidInput);
  h.record(1, {1.0, 1.0});
  EXPECT_THROW(h.record(1, {1.0, 1.0}), ega::InvalidInput);
  EXPECT_THROW(h.at(2), ega::PreconditionError);
}

TEST(LearningRateRatio, HandExamples) {
  // warmup epoch 1; query epoch 3 reads epoch 2.
  EXPECT_DOUBLE_EQ(bal::learning_rate_ratio(history_with({{2.0}, {1.0}}, 1), 0, 3), 0.5);
  EXPECT_DOUBLE_EQ(bal::learning_rate_ratio(history_with({{2.0}, {2.0}}, 1), 0, 3), 1.0);
  EXPECT_DOUBLE_EQ(bal::learning_rate_ratio(history_with({{0.4}, {0.5}}, 1), 0, 3), 1.25);
}

TEST(LearningRateRatio, Errors) {
  auto h = history_with({{1.0}, {1.0}, {1.0}}, 2);
  EXPECT_THROW(bal::learning_rate_ratio(h, 0, 2), ega::PreconditionError);
  EXPECT_THROW(bal::learning_rate_ratio(h, 0, 6), ega::PreconditionError);
  EXPECT_THROW(bal::learning_rate_ratio(history_with({{0.0}, {1.0}}, 1), 0, 3),
               ega::DegenerateHistory);
}

TEST(EccentricVector, HandExamples) {
  std::vector<double> ones{1, 1, 1};
  for (double k : bal::eccentric_vector(ones, 0.5).weights) EXPECT_DOUBLE_EQ(k, 1.0);

  std::vector<double> lr{2, 1};
  auto k = bal::eccentric_vector(lr, 1.0).weights;
  const double e = std::exp(1.0);
  EXPECT_NEAR(k[0], 2 * e / (e + 1), 1e-15);
  EXPECT_NEAR(k[1], 2 / (e + 1), 1e-15);
  EXPECT_NEAR(k[0], 1.46212, 1e-5);

  // Flattening at large T; exact deviation at T=1e6 is 2/3 * 4e-6.
  std::vector<double> skew{5, 1, 1};
  auto flat = bal::eccentric_vector(skew, 1e6).weights;
  const double ex = std::exp(4e-6);
  EXPECT_NEAR(flat[0], 3 * ex / (ex + 2), 1e-14);
  EXPECT_NEAR(flat[1], 3 / (ex + 2), 1e-14);
  for (double w : flat) EXPECT_NEAR(w, 1.0, 1e-5);
}

TEST(EccentricVector, OverflowGuard) {
  std::vector<double> lr{1000.0, 999.0};
  auto k = bal::eccentric_vector(lr, 0.01).weights;
  EXPECT_TRUE(std::isfinite(k[0]) && std::isfinite(k[1]));
  EXPECT_NEAR(k[0] + k[1], 2.0, 1e-12);
  EXPECT_GT(k[1], 0.0);
}

TEST(EccentricVector, Errors) {
  std::vector<double> lr{1, 2};
  EXPECT_THROW(bal::eccentric_vector(lr, 0.0), ega::InvalidConfig);
  EXPECT_THROW(bal::eccentric_vector(lr, -1.0), ega::InvalidConfig);
  std::vector<double> bad{1, NAN};
  EXPECT_THROW(bal::eccentric_vector(bad, 1.0), ega::InvalidInput);
}

TEST(EccentricVector, Properties) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<int> nt(2, 8);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = nt(rng);
    std::vector<double> lr(n);
    for (double& v : lr) v = u(rng);
    const double t = std::exp(u(rng) * 2 - 3);
    auto k = bal::eccentric_vector(lr, t).weights;
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), n, 1e-12);
    for (int i = 0; i < n; ++i) {
      EXPECT_GT(k[i], 0.0);
      for (int j = 0; j < n; ++j) {
        if (lr[i] > lr[j]) {
          EXPECT_GT(k[i], k[j]);
        }
      }
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> lrp(n);
    for (int i = 0; i < n; ++i) lrp[i] = lr[perm[i]];
    auto kp = bal::eccentric_vector(lrp, t).weights;
    for (int i = 0; i < n; ++i) EXPECT_NEAR(kp[i], k[perm[i]], 1e-14);
    // Larger T never increases the largest weight.
    auto k2 = bal::eccentric_vector(lr, 2 * t).weights;
    EXPECT_LE(*std::max_element(k2.begin(), k2.end()), *std::max_element(k.begin(), k.end()) + 1e-12);
  }
}

TEST(EpochWeights, WarmupThenEccentric) {
  auto h = history_with({{4, 4}, {3, 3}, {2, 1}}, 2);
  EXPECT_EQ(bal::epoch_weights(h, 1, 1.0), (std::vector<double>{1, 1}));
  EXPECT_EQ(bal::epoch_weights(h, 2, 1.0), (std::vector<double>{1, 1}));
  EXPECT_EQ(bal::epoch_weights(h, 3, 1.0), (std::vector<double>{1, 1}));
  auto w = bal::epoch_weights(h, 4, 1.0);
  std::vector<double> lr{2.0 / 3.0, 1.0 / 3.0};
  auto ref = bal::eccentric_vector(lr, 1.0).weights;
  EXPECT_EQ(w, ref);
  EXPECT_GT(w[0], w[1]);
}

TEST(EpochWeights, ZeroWarmupLossIsPinned) {
  auto h = history_with({{0, 2}, {0, 1}}, 1);
  auto w = bal::epoch_weights(h, 3, 1.0);
  std::vector<double> lr{1.0, 0.5};
  EXPECT_EQ(w, bal::eccentric_vector(lr, 1.0).weights);
}

TEST(EgaStep, WarmupOrthogonalRowsHandCase) {
  auto h = history_with({{1, 1}}, 4);
  auto out = bal::ega_step(gm({{3, 0}, {0, 1}}), h, 2, 1.0);
  ASSERT_FALSE(out.skipped);
  EXPECT_NEAR(out.joint[0], 1.0, 1e-15);
  EXPECT_NEAR(out.joint[1], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(out.sigma_min, 1.0);
}

TEST(EgaStep, IdenticalRowsRankOne) {
  auto h = history_with({{1, 1}}, 4);
  auto out = bal::ega_step(gm({{1, 0}, {1, 0}}), h, 1, 1.0);
  EXPECT_EQ(out.rank, 1u);
  EXPECT_NEAR(out.joint[0], 2.0, 1e-12);
  EXPECT_EQ(out.joint[1], 0.0);
  auto ortho = bal::ortho_only_step(gm({{1, 0}, {1, 0}}));
  EXPECT_EQ(out.joint, ortho.joint);
}

TEST(EgaStep, ZeroGradientsSkip) {
  auto h = history_with({{1, 1}}, 4);
  auto out = bal::ega_step(gm({{0, 0, 0}, {0, 0, 0}}), h, 1, 1.0);
  EXPECT_TRUE(out.skipped);
  EXPECT_EQ(out.joint, (std::vector<double>{0, 0, 0}));
  std::vector<double> theta{1, 2, 3};
  EXPECT_EQ(bal::apply_update(theta, out, 0.1), theta);
}

TEST(EgaStep, NoConflictInProjectedSpace) {
  std::mt19937_64 rng(43);
  auto h = history_with({{4, 4, 4}, {3, 1, 2}}, 1);
  for (int rep = 0; rep < 30; ++rep) {
    Matrix g = Matrix::from_rows(ega::testing::random_rows(rng, 3, 25));
    // Make a strong conflict plus magnitude dominance.
    for (double& v : g.row(2)) v *= 50.0;
    auto out = bal::ega_step(bal::GradientMatrix(g), h, 3, 1.0);
    auto al = ega::linalg::project_align(g);
    const double s2 = out.sigma_min * out.sigma_min;
    for (std::size_t i = 0; i < 3; ++i) {
      const double ip = ega::testing::naive_dot(out.joint, {al.aligned.row(i).begin(), al.aligned.row(i).end()});
      EXPECT_NEAR(ip, out.weights[i] * s2, 1e-8 * out.weights[i] * s2);
      EXPECT_GT(ip, 0.0);
    }
    // v^T (G~ G^T) v >= 0
    Matrix cross = ega::linalg::multiply(al.aligned, g.transpose());
    double q = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) q += out.weights[i] * cross(i, j) * out.weights[j];
    EXPECT_GE(q, -1e-9);
  }
}

TEST(EgaStep, EqualsOrthoOnlyDuringWarmup) {
  std::mt19937_64 rng(47);
  auto h = history_with({{1, 2, 3}, {1, 1, 1}, {0.5, 0.5, 0.5}}, 3);
  for (int rep = 0; rep < 10; ++rep) {
    auto g = bal::GradientMatrix(Matrix::from_rows(ega::testing::random_rows(rng, 3, 64)));
    for (int epoch = 1; epoch <= 3; ++epoch)
      EXPECT_EQ(bal::ega_step(g, h, epoch, 0.3).joint, bal::ortho_only_step(g).joint);
  }
}

TEST(EgaStep, Deterministic) {
  std::mt19937_64 rng(53);
  auto h = history_with({{1, 2, 3}, {0.2, 1.5, 2}}, 1);
  auto g = bal::GradientMatrix(Matrix::from_rows(ega::testing::random_rows(rng, 3, 500)));
  auto a = bal::ega_step(g, h, 3, 0.5);
  auto b = bal::ega_step(g, h, 3, 0.5);
  EXPECT_EQ(a.joint, b.joint);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(EqualWeight, HandExamples) {
  EXPECT_EQ(bal::equal_weight_step(gm({{1, 0}, {0, 1}})).joint, (std::vector<double>{1, 1}));
  EXPECT_EQ(bal::equal_weight_step(gm({{1, 0}, {-1, 0}})).joint, (std::vector<double>{0, 0}));
  EXPECT_EQ(bal::equal_weight_step(gm({{1, 0}, {0, 100}})).joint, (std::vector<double>{1, 100}));
}

TEST(OrthoOnly, HandCase) {
  auto out = bal::ortho_only_step(gm({{3, 0}, {0, 1}}));
  EXPECT_NEAR(out.joint[0], 1.0, 1e-15);
  EXPECT_NEAR(out.joint[1], 1.0, 1e-15);
}

TEST(ApplyUpdate, HandExamples) {
  bal::BalancedGradient g;
  g.joint = {0.5};
  EXPECT_DOUBLE_EQ(bal::apply_update(std::vector<double>{1.0}, g, 0.1)[0], 0.95);
  g.joint = {0.0, 0.0};
  EXPECT_EQ(bal::apply_update(std::vector<double>{3.0, 4.0}, g, 0.1), (std::vector<double>{3, 4}));
  g.joint = {1, -2};
  EXPECT_EQ(bal::apply_update(std::vector<double>{0, 0}, g, 1.0), (std::vector<double>{-1, 2}));
  EXPECT_THROW(bal::apply_update(std::vector<double>{0}, g, 1.0), ega::InvalidInput);
  EXPECT_THROW(bal::apply_update(std::vector<double>{0, 0}, g, 0.0), ega::InvalidInput);
}

TEST(StrategyRegistry, KnownAndUnknown) {
  bal::StrategyParams p;
  for (const auto& id : bal::strategy_ids()) EXPECT_EQ(bal::make_strategy(id, p)->id(), id);
  EXPECT_THROW(bal::make_strategy("pcgrad", p), ega::InvalidConfig);
  p.temperature = 0.0;
  EXPECT_THROW(bal::make_strategy("ega", p), ega::InvalidConfig);
}

TEST(StrategyRegistry, EgaNeedsHistory) {
  auto s = bal::make_strategy("ega", {});
  EXPECT_THROW(s->step(gm({{1, 0}, {0, 1}}), {}), ega::PreconditionError);
}

}  // namespace
