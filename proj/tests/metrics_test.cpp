#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ega/error.hpp"
#include "ega/metrics.hpp"
#include "oracles.hpp"

namespace {

namespace mt = ega::metrics;
using V = std::vector<double>;

TEST(Rmse, HandValues) {
  EXPECT_EQ(mt::rmse(V{1, 2, 3}, V{1, 2, 3}), 0.0);
  EXPECT_NEAR(mt::rmse(V{1, 2, 3}, V{3.5, 4.5, 5.5}), 2.5, 1e-15);
  EXPECT_NEAR(mt::rmse(V{0, 0}, V{3, 4}), std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(mt::rmse(V{0, 0}, V{3, 4}), 3.5355339059, 1e-9);
}

TEST(Rmse, LengthErrors) {
  EXPECT_THROW(mt::rmse(V{1, 2}, V{1}), ega::InvalidInput);
  EXPECT_THROW(mt::rmse(V{}, V{}), ega::InvalidInput);
}

TEST(Rmse, IsAMetric) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  auto draw = [&] {
    V v(64);
    for (auto& x : v) x = nd(rng);
    return v;
  };
  for (int i = 0; i < 100; ++i) {
    const V a = draw(), b = draw(), c = draw();
    EXPECT_EQ(mt::rmse(a, b), mt::rmse(b, a));
    EXPECT_GE(mt::rmse(a, b), 0.0);
    EXPECT_EQ(mt::rmse(a, a), 0.0);
    EXPECT_GT(mt::rmse(a, b), 0.0);
    EXPECT_LE(mt::rmse(a, c), mt::rmse(a, b) + mt::rmse(b, c) + 1e-12);
  }
}

TEST(Pcc, HandValues) {
  EXPECT_NEAR(*mt::pcc(V{1, 2, 3}, V{1, 2, 4}), std::sqrt(27.0 / 28.0), 1e-12);
  EXPECT_NEAR(*mt::pcc(V{1, 2, 3}, V{1, 2, 4}), 0.98198, 1e-5);
  EXPECT_NEAR(*mt::pcc(V{1, 5, 2, 7}, V{5, 13, 7, 17}), 1.0, 1e-15);
  EXPECT_NEAR(*mt::pcc(V{1, 5, 2, 7}, V{-1, -5, -2, -7}), -1.0, 1e-15);
}

TEST(Pcc, ZeroVarianceIsUndefined) {
  EXPECT_FALSE(mt::pcc(V{1, 1, 1}, V{1, 2, 3}).has_value());
  EXPECT_FALSE(mt::pcc(V{1, 2, 3}, V{4, 4, 4}).has_value());
  EXPECT_THROW(mt::pcc(V{1, 2}, V{1, 2, 3}), ega::InvalidInput);
}

TEST(Pcc, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(-3, 3);
  for (int i = 0; i < 100; ++i) {
    V a(50), b(50);
    for (auto& x : a) x = nd(rng);
    for (auto& x : b) x = nd(rng);
    double alpha = ud(rng);
    if (std::abs(alpha) < 0.05) alpha = 0.5;
    const double beta = ud(rng);
    V c(b);
    for (auto& x : c) x = alpha * x + beta;
    EXPECT_NEAR(*mt::pcc(a, c), std::copysign(1.0, alpha) * *mt::pcc(a, b), 1e-12);
  }
}

TEST(RSquared, HandValues) {
  const V t{1, 2, 3, 4};
  EXPECT_EQ(*mt::r_squared(t, t), 1.0);
  EXPECT_NEAR(*mt::r_squared(t, V{2.5, 2.5, 2.5, 2.5}), 0.0, 1e-15);
  EXPECT_LT(*mt::r_squared(t, V{4, 3, 2, 1}), 0.0);
  EXPECT_NEAR(*mt::r_squared(t, V{4, 3, 2, 1}), -3.0, 1e-12);
  EXPECT_FALSE(mt::r_squared(V{2, 2}, V{1, 3}).has_value());
}

TEST(AnchorMatch, HandExample) {
  const auto m = mt::anchor_match(V{1.0, 2.0}, V{1.05, 2.5});
  ASSERT_TRUE(m);
  ASSERT_EQ(m->errors.size(), 1u);
  EXPECT_NEAR(m->errors[0], 0.05, 1e-9);
  EXPECT_NEAR(m->mdr, 0.5, 1e-15);
}

TEST(AnchorMatch, Boundaries) {
  const V t{0.5, 1.3, 2.2};
  const auto same = mt::anchor_match(t, t);
  EXPECT_EQ(same->mdr, 0.0);
  EXPECT_EQ(same->errors, V(3, 0.0));
  EXPECT_EQ(mt::anchor_match(t, V{})->mdr, 1.0);
  EXPECT_FALSE(mt::anchor_match(V{}, t).has_value());
}

TEST(AnchorMatch, OneToOne) {
  // Two truths fighting over a single prediction: the nearer one wins.
  const auto m = mt::anchor_match(V{1.0, 1.1}, V{1.08});
  EXPECT_NEAR(m->mdr, 0.5, 1e-15);
  ASSERT_EQ(m->errors.size(), 1u);
  EXPECT_NEAR(m->errors[0], 0.02, 1e-12);
}

TEST(AnchorMatch, MdrMonotoneInTolerance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ud(0, 10);
  for (int trial = 0; trial < 200; ++trial) {
    V t(12), p(10);
    for (auto& x : t) x = ud(rng);
    for (auto& x : p) x = ud(rng);
    std::sort(t.begin(), t.end());
    std::sort(p.begin(), p.end());
    double prev = 1.0;
    for (double tol = 0.0; tol <= 2.0; tol += 0.05) {
      const double mdr = mt::anchor_match(t, p, tol)->mdr;
      EXPECT_GE(mdr, 0.0);
      EXPECT_LE(mdr, 1.0);
      EXPECT_LE(mdr, prev);
      prev = mdr;
    }
  }
}

TEST(PpiError, HandValues) {
  EXPECT_EQ(mt::ppi_error(V{800, 900}, V{800, 900}), 0.0);
  EXPECT_NEAR(mt::ppi_error(V{800, 900, 700}, V{808, 908, 708}), 8.0, 1e-12);
  EXPECT_NEAR(mt::ppi_error(V{800, 900}, V{810, 880}), 15.0, 1e-12);
  EXPECT_THROW(mt::ppi_error(V{800}, V{800, 900}), ega::InvalidInput);
}

const std::vector<mt::MetricSpec> kSpecs = {
    {0, "rmse", mt::Direction::LowerBetter},
    {0, "pcc", mt::Direction::HigherBetter},
    {1, "mdr", mt::Direction::LowerBetter},
    {2, "ppi_error", mt::Direction::LowerBetter},
};

TEST(DeltaM, HandValues) {
  const std::vector<mt::MetricSpec> one{{0, "rmse", mt::Direction::LowerBetter}};
  EXPECT_NEAR(mt::delta_m({{{0, "rmse"}, 9.0}}, {{{0, "rmse"}, 10.0}}, one).percent, 10.0, 1e-9);

  const std::vector<mt::MetricSpec> two{{0, "pcc", mt::Direction::HigherBetter},
                                        {1, "rmse", mt::Direction::LowerBetter}};
  const mt::MetricValues base{{{0, "pcc"}, 0.5}, {{1, "rmse"}, 2.0}};
  const mt::MetricValues meth{{{0, "pcc"}, 0.55}, {{1, "rmse"}, 2.2}};
  EXPECT_NEAR(mt::delta_m(meth, base, two).percent, 0.0, 1e-9);
}

TEST(DeltaM, ZeroAgainstItself) {
  const mt::MetricValues v{{{0, "rmse"}, 0.3}, {{0, "pcc"}, 0.8}, {{1, "mdr"}, 0.1}, {{2, "ppi_error"}, 12.0}};
  const auto d = mt::delta_m(v, v, kSpecs);
  EXPECT_EQ(d.percent, 0.0);
  EXPECT_TRUE(d.excluded.empty());
}

TEST(DeltaM, ZeroBaselineExcludedMissingThrows) {
  const mt::MetricValues base{{{0, "rmse"}, 0.3}, {{0, "pcc"}, 0.8}, {{1, "mdr"}, 0.0}, {{2, "ppi_error"}, 12.0}};
  mt::MetricValues meth = base;
  meth[{1, "mdr"}] = 0.2;
  const auto d = mt::delta_m(meth, base, kSpecs);
  ASSERT_EQ(d.excluded.size(), 1u);
  EXPECT_EQ(d.excluded[0], (mt::MetricKey{1, "mdr"}));
  EXPECT_EQ(d.percent, 0.0);

  meth.erase({2, "ppi_error"});
  EXPECT_THROW(mt::delta_m(meth, base, kSpecs), ega::InvalidInput);
}

TEST(DeltaM, AdditiveAcrossDisjointTaskSets) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(0.1, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    mt::MetricValues base, meth;
    for (const auto& s : kSpecs) {
      base[{s.task, s.name}] = ud(rng);
      meth[{s.task, s.name}] = ud(rng);
    }
    const std::vector<mt::MetricSpec> first(kSpecs.begin(), kSpecs.begin() + 2);   // task 0
    const std::vector<mt::MetricSpec> second(kSpecs.begin() + 2, kSpecs.end());    // tasks 1, 2
    const double whole = mt::delta_m(meth, base, kSpecs).percent;
    const double combined =
        (1.0 * mt::delta_m(meth, base, first).percent + 2.0 * mt::delta_m(meth, base, second).percent) / 3.0;
    EXPECT_NEAR(whole, combined, 1e-12);
  }
}

TEST(Welch, IdenticalSamples) {
  const V a{1.0, 2.5, 3.0, 2.0, 1.7};
  const auto r = mt::welch_t(a, a);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->t, 0.0);
  EXPECT_EQ(r->p, 1.0);
}

TEST(Welch, SeparatedSamples) {
  const V a{0, 1e-9, -1e-9, 0.5e-9};
  const V b{1, 1 + 1e-9, 1 - 1e-9, 1 + 0.5e-9};
  const auto r = mt::welch_t(a, b);
  ASSERT_TRUE(r);
  EXPECT_LT(r->p, 1e-6);
  EXPECT_LT(r->t, 0.0);
}

TEST(Welch, MatchesQuadratureOracle) {
  const V a{0.91, 1.12, 0.85, 1.30, 1.02};
  const V b{1.21, 1.45, 1.10, 1.38, 1.52};
  const auto r = mt::welch_t(a, b);
  ASSERT_TRUE(r);
  // Hand statistics.
  const double ma = 1.04, mb = 1.332;
  double va = 0, vb = 0;
  for (double x : a) va += (x - ma) * (x - ma);
  for (double x : b) vb += (x - mb) * (x - mb);
  va /= 4 * 5;
  vb /= 4 * 5;
  EXPECT_NEAR(r->t, (ma - mb) / std::sqrt(va + vb), 1e-12);
  EXPECT_NEAR(r->dof, (va + vb) * (va + vb) / (va * va / 4 + vb * vb / 4), 1e-10);
  EXPECT_NEAR(r->p, ega::testing::student_t_two_sided_p(r->t, r->dof), 1e-4);
}

TEST(Welch, Degenerate) {
  EXPECT_FALSE(mt::welch_t(V{1.0}, V{1.0, 2.0}).has_value());
  EXPECT_FALSE(mt::welch_t(V{1, 1, 1}, V{2, 2, 2}).has_value());
  EXPECT_FALSE(mt::welch_t(V{1, NAN, 1}, V{2, 3, 2}).has_value());
  const auto same = mt::welch_t(V{2, 2, 2}, V{2, 2});
  ASSERT_TRUE(same);
  EXPECT_EQ(same->p, 1.0);
}

TEST(Summary, MeanAndInterval) {
  const auto s = mt::summarize(V{1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.ci95, 1.96 * std::sqrt(2.5 / 5.0), 1e-12);
  EXPECT_EQ(s.count, 5u);
  EXPECT_EQ(mt::summarize(V{7}).ci95, 0.0);
}

TEST(Report, RoundTrip) {
  std::vector<mt::ReportRow> rows{
      {"a1b2", 42, "ega", 1.0, "none", 0.0, "waveform", "rmse", 0.1234567890123},
      {"a1b2", 42, "ega", 1.0, "constant", -3.0, "anchor", "mdr", 1.0 / 3.0},
      {"ffff", 18446744073709551615ULL, "equal_weight", 0.0, "abrupt", -9.0, "length", "ppi_error", 1e-300},
  };
  std::stringstream ss;
  mt::write_rows(rows, ss);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), mt::kReportHeader);
  EXPECT_EQ(mt::read_rows(ss), rows);
}

TEST(Report, RejectsMalformed) {
  std::stringstream bad_header("run,seed\n");
  EXPECT_THROW(mt::read_rows(bad_header), ega::InvalidInput);
  std::stringstream short_row(std::string(mt::kReportHeader) + "\nx,1,ega\n");
  EXPECT_THROW(mt::read_rows(short_row), ega::InvalidInput);
  std::stringstream bad_seed(std::string(mt::kReportHeader) + "\nx,-1,ega,1,none,0,waveform,rmse,1\n");
  EXPECT_THROW(mt::read_rows(bad_seed), ega::InvalidInput);
  std::vector<mt::ReportRow> comma{{"a,b", 1, "ega", 1, "none", 0, "w", "rmse", 1}};
  std::stringstream out;
  EXPECT_THROW(mt::write_rows(comma, out), ega::InvalidInput);
}

}  // namespace
