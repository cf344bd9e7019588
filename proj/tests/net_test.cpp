#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ega/error.hpp"
#include "ega/net.hpp"

namespace {

namespace net = ega::net;
using ega::linalg::Matrix;

net::ModelConfig tiny_config() {
  net::ModelConfig c;
  c.input_dim = 6;
  c.trunk_widths = {8, 6};
  c.head_hidden = 0;
  c.waveform_dim = 5;
  c.anchor_classes = 7;
  c.length_classes = 4;
  return c;
}

net::Batch random_batch(const net::ModelConfig& c, std::size_t b, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  net::Batch batch;
  batch.inputs = Matrix(b, c.input_dim);
  batch.waveform = Matrix(b, c.waveform_dim);
  for (double& v : batch.inputs.data()) v = nd(rng);
  for (double& v : batch.waveform.data()) v = nd(rng);
  std::uniform_int_distribution<std::size_t> anchor(0, c.anchor_classes - 1);
  std::uniform_int_distribution<std::size_t> length(0, c.length_classes - 1);
  for (std::size_t s = 0; s < b; ++s) {
    std::vector<std::size_t> a;
    const std::size_t count = s % 3;  // includes empty windows
    for (std::size_t k = 0; k < count; ++k) a.push_back(anchor(rng));
    batch.anchors.push_back(a);
    batch.length_class.push_back(length(rng));
  }
  return batch;
}

// Sets a pass's head outputs directly.
net::ForwardPass pass_with(const Matrix& wave, const Matrix& anchor, const Matrix& length) {
  net::ForwardPass p;
  p.heads[0].outputs = {wave};
  p.heads[1].outputs = {anchor};
  p.heads[2].outputs = {length};
  return p;
}

TEST(Mlp, FlattenRoundTripAndErrors) {
  auto m = net::Model::create(tiny_config(), 3);
  auto flat = m.trunk.flatten();
  net::Mlp copy = m.trunk;
  std::fill(copy.params().begin(), copy.params().end(), 0.0);
  copy.unflatten(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_EQ(m.trunk.param_count(), 6u * 8 + 8 + 8 * 6 + 6);
  EXPECT_THROW(copy.unflatten(std::vector<double>(3)), ega::InvalidInput);
}

TEST(Forward, ZeroWeightsGiveZeroRegression) {
  auto m = net::Model::create(tiny_config(), 1);
  std::fill(m.trunk.params().begin(), m.trunk.params().end(), 0.0);
  for (auto& h : m.heads) std::fill(h.params().begin(), h.params().end(), 0.0);
  std::mt19937_64 rng(2);
  auto batch = random_batch(m.config, 4, rng);
  auto pass = net::forward(m, batch.inputs);
  for (double v : pass.prediction(0).data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityLayerPassesInputThrough) {
  net::ModelConfig c;
  c.input_dim = 3;
  c.trunk_widths = {3};
  c.trunk_activation = net::Activation::Identity;
  c.head_hidden = 0;
  c.waveform_dim = 3;
  c.anchor_classes = 2;
  c.length_classes = 2;
  auto m = net::Model::create(c, 0);
  // weight = I, bias = 0 for trunk and waveform head
  std::vector<double> eye{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  m.trunk.unflatten(eye);
  m.heads[0].unflatten(eye);
  Matrix x = Matrix::from_rows({{0.5, -2.0, 3.25}});
  auto pass = net::forward(m, x);
  EXPECT_EQ(pass.prediction(0), x);
}

TEST(Forward, DeterministicForSeed) {
  auto a = net::Model::create(tiny_config(), 99);
  auto b = net::Model::create(tiny_config(), 99);
  std::mt19937_64 rng(5);
  auto batch = random_batch(a.config, 3, rng);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(net::forward(a, batch.inputs).prediction(i), net::forward(b, batch.inputs).prediction(i));
}

TEST(Forward, ShapeMismatch) {
  auto m = net::Model::create(tiny_config(), 1);
  EXPECT_THROW(net::forward(m, Matrix(2, 5)), ega::InvalidInput);
  std::mt19937_64 rng(1);
  auto batch = random_batch(m.config, 2, rng);
  batch.length_class[0] = 99;
  EXPECT_THROW(net::per_task_gradients(m, batch), ega::InvalidInput);
}

TEST(TaskLosses, PerfectWaveformIsZero) {
  net::Batch b;
  b.waveform = Matrix::from_rows({{1, 2, 3}});
  b.inputs = Matrix(1, 1);
  b.anchors = {{0}};
  b.length_class = {0};
  auto p = pass_with(b.waveform, Matrix(1, 4), Matrix(1, 4));
  EXPECT_EQ(net::task_losses(p, b).values[0], 0.0);
}

TEST(TaskLosses, UniformLogitsGiveLogC) {
  net::Batch b;
  b.waveform = Matrix(1, 2);
  b.inputs = Matrix(1, 1);
  b.anchors = {{3, 1}};
  b.length_class = {2};
  auto p = pass_with(Matrix(1, 2), Matrix(1, 5, 0.7), Matrix(1, 8, -3.0));
  auto l = net::task_losses(p, b);
  EXPECT_NEAR(l.values[1], std::log(5.0), 1e-15);
  EXPECT_NEAR(l.values[2], std::log(8.0), 1e-15);
}

TEST(TaskLosses, HandThreeClass) {
  // softmax([0, 0, ln 2]) = [1/4, 1/4, 1/2]
  std::vector<double> z{0.0, 0.0, std::log(2.0)};
  const double p3 = std::exp(z[2]) / (std::exp(z[0]) + std::exp(z[1]) + std::exp(z[2]));
  EXPECT_NEAR(net::cross_entropy(z, 2), -std::log(p3), 1e-15);
  EXPECT_NEAR(net::cross_entropy(z, 2), std::log(2.0), 1e-15);
  EXPECT_THROW(net::cross_entropy(z, 3), ega::InvalidInput);
}

TEST(TaskLosses, EmptyAnchorWindowContributesZero) {
  net::Batch b;
  b.waveform = Matrix(2, 2);
  b.inputs = Matrix(2, 1);
  b.anchors = {{}, {0}};
  b.length_class = {0, 0};
  auto p = pass_with(Matrix(2, 2), Matrix(2, 4), Matrix(2, 2));
  auto l = net::task_losses(p, b);
  EXPECT_EQ(l.empty_anchor_samples, 1u);
  EXPECT_NEAR(l.values[1], std::log(4.0) / 2.0, 1e-15);
  EXPECT_TRUE(std::isfinite(l.values[1]));
}

TEST(TaskLosses, NonNegative) {
  std::mt19937_64 rng(13);
  for (int seed = 0; seed < 10; ++seed) {
    auto m = net::Model::create(tiny_config(), seed);
    auto batch = random_batch(m.config, 5, rng);
    for (double v : net::task_losses(net::forward(m, batch.inputs), batch).values) EXPECT_GE(v, 0.0);
  }
}

// Scalar linear model p = w x with the RMSE of one output equal to |wx - y|;
// the squared loss gradient 2 L dL/dw must equal 2 (wx - y) x.
TEST(Gradients, OneParameterClosedForm) {
  net::ModelConfig c;
  c.input_dim = 1;
  c.trunk_widths = {1};
  c.trunk_activation = net::Activation::Identity;
  c.head_hidden = 0;
  c.waveform_dim = 1;
  c.anchor_classes = 2;
  c.length_classes = 2;
  auto m = net::Model::create(c, 0);
  const double w = 0.7, x = 1.5, y = -0.4;
  m.trunk.unflatten(std::vector<double>{w, 0.0});
  m.heads[0].unflatten(std::vector<double>{1.0, 0.0});
  net::Batch b;
  b.inputs = Matrix::from_rows({{x}});
  b.waveform = Matrix::from_rows({{y}});
  b.anchors = {{}};
  b.length_class = {0};
  auto g = net::per_task_gradients(m, b);
  const double l1 = g.losses.values[0];
  EXPECT_NEAR(2.0 * l1 * g.trunk.task(0)[0], 2.0 * (w * x - y) * x, 1e-14);
}

double loss_at(const net::Model& m, const net::Batch& b, std::size_t task) {
  return net::task_losses(net::forward(m, b.inputs), b).values[task];
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  std::mt19937_64 rng(17);
  const double h = 1e-5;
  double worst = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    auto cfg = tiny_config();
    cfg.head_hidden = seed % 2 ? 4 : 0;
    auto m = net::Model::create(cfg, 1000 + seed);
    ASSERT_LE(m.trunk.param_count() + m.heads[0].param_count() + m.heads[1].param_count() +
                  m.heads[2].param_count(),
              500u);
    auto batch = random_batch(cfg, 4, rng);
    auto g = net::per_task_gradients(m, batch);
    for (std::size_t task = 0; task < 3; ++task) {
      for (std::size_t p = 0; p < m.trunk.param_count(); ++p) {
        auto plus = m, minus = m;
        plus.trunk.params()[p] += h;
        minus.trunk.params()[p] -= h;
        const double fd = (loss_at(plus, batch, task) - loss_at(minus, batch, task)) / (2 * h);
        const double an = g.trunk.task(task)[p];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
      }
      for (std::size_t p = 0; p < m.heads[task].param_count(); ++p) {
        auto plus = m, minus = m;
        plus.heads[task].params()[p] += h;
        minus.heads[task].params()[p] -= h;
        const double fd = (loss_at(plus, batch, task) - loss_at(minus, batch, task)) / (2 * h);
        const double an = g.heads[task][p];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
      }
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Gradients, PerfectRegressionGivesZeroRow) {
  auto m = net::Model::create(tiny_config(), 4);
  std::mt19937_64 rng(8);
  auto batch = random_batch(m.config, 3, rng);
  batch.waveform = net::forward(m, batch.inputs).prediction(0);
  auto g = net::per_task_gradients(m, batch);
  EXPECT_EQ(g.losses.values[0], 0.0);
  for (double v : g.trunk.task(0)) EXPECT_EQ(v, 0.0);
}

TEST(Sgd, PlainStepWithoutMomentum) {
  net::SgdMomentum opt(0.1, 0.0, 0.0);
  std::vector<double> w{1.0, -1.0};
  opt.step(w, std::vector<double>{2.0, 0.5});
  EXPECT_DOUBLE_EQ(w[0], 0.8);
  EXPECT_DOUBLE_EQ(w[1], -1.05);
}

TEST(Sgd, VelocityDecaysGeometrically) {
  net::SgdMomentum opt(1.0, 0.5, 0.0);
  std::vector<double> w{0.0};
  opt.step(w, std::vector<double>{1.0});
  for (int i = 0; i < 4; ++i) {
    const double before = opt.velocity()[0];
    opt.step(w, std::vector<double>{0.0});
    EXPECT_DOUBLE_EQ(opt.velocity()[0], 0.5 * before);
  }
}

TEST(Sgd, TwoStepHandRecursion) {
  net::SgdMomentum opt(1.0, 0.5, 0.0);
  std::vector<double> w{0.0};
  opt.step(w, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(w[0], -1.0);
  opt.step(w, std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(w[0], -2.5);
}

TEST(Sgd, WeightDecayAndConfigErrors) {
  net::SgdMomentum opt(0.5, 0.0, 0.1);
  std::vector<double> w{2.0};
  opt.step(w, std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(w[0], 2.0 - 0.5 * 0.2);
  EXPECT_THROW(net::SgdMomentum(0.0, 0.0, 0.0), ega::InvalidConfig);
  EXPECT_THROW(net::SgdMomentum(0.1, 1.0, 0.0), ega::InvalidConfig);
  EXPECT_THROW(net::SgdMomentum(0.1, 0.5, -1.0), ega::InvalidConfig);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto cfg = tiny_config();
  cfg.head_hidden = 3;
  auto m = net::Model::create(cfg, 1234);
  std::stringstream ss;
  net::save_checkpoint(m, ss);
  auto back = net::load_checkpoint(ss);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.trunk.flatten(), m.trunk.flatten());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.heads[i].flatten(), m.heads[i].flatten());
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("ega-checkpoint 9\n");
  EXPECT_THROW(net::load_checkpoint(bad), ega::InvalidInput);
  auto m = net::Model::create(tiny_config(), 1);
  std::stringstream ss;
  net::save_checkpoint(m, ss);
  std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(net::load_checkpoint(truncated), ega::InvalidInput);
}

}  // namespace
