#include "ega/balance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ega/error.hpp"
#include "ega/simd.hpp"

namespace ega::balance {

GradientMatrix::GradientMatrix(linalg::Matrix rows) : m_(std::move(rows)) {
  if (m_.rows() < 2) throw InvalidInput("gradient matrix needs at least two tasks");
  if (m_.cols() < 1) throw InvalidInput("gradient matrix needs at least one parameter");
  if (!m_.all_finite()) throw InvalidInput("gradient matrix has non-finite entries");
}

LossHistory::LossHistory(std::size_t task_count, int warmup_epoch)
    : task_count_(task_count), warmup_epoch_(warmup_epoch) {
  if (task_count == 0) throw InvalidConfig("loss history needs at least one task");
  if (warmup_epoch < 1) throw InvalidConfig("warmup epoch must be >= 1");
}

void LossHistory::record(int epoch, std::vector<double> losses) {
  if (losses.size() != task_count_) {
    throw InvalidInput("loss history: expected " + std::to_string(task_count_) +
                       " losses, got " + std::to_string(losses.size()));
  }
  for (double l : losses) {
    if (!std::isfinite(l) || l < 0.0) throw InvalidInput("loss history: losses must be finite and >= 0");
  }
  if (!losses_.empty() && epoch <= losses_.rbegin()->first) {
    throw InvalidInput("loss history: epoch " + std::to_string(epoch) + " recorded out of order");
  }
  losses_.emplace(epoch, std::move(losses));
}

const std::vector<double>& LossHistory::at(int epoch) const {
  auto it = losses_.find(epoch);
  if (it == losses_.end()) {
    throw PreconditionError("loss history: epoch " + std::to_string(epoch) + " not recorded");
  }
  return it->second;
}

double learning_rate_ratio(const LossHistory& history, std::size_t task, int epoch) {
  if (task >= history.task_count()) throw InvalidInput("learning_rate_ratio: task index out of range");
  if (epoch <= history.warmup_epoch()) {
    throw PreconditionError("learning_rate_ratio: epoch " + std::to_string(epoch) +
                            " is not past the warmup epoch");
  }
  const double warm = history.at(history.warmup_epoch())[task];
  if (warm < kMinWarmupLoss) {
    throw DegenerateHistory("learning_rate_ratio: warmup loss of task " +
                            std::to_string(task) + " is zero");
  }
  return history.at(epoch - 1)[task] / warm;
}

EccentricVector eccentric_vector(std::span<const double> lr, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidConfig("eccentric_vector: temperature must be positive and finite");
  }
  if (lr.empty()) throw InvalidInput("eccentric_vector: no tasks");
  double top = -INFINITY;
  for (double v : lr) {
    if (!std::isfinite(v)) throw InvalidInput("eccentric_vector: non-finite ratio");
    top = std::max(top, v / temperature);
  }
  EccentricVector out{std::vector<double>(lr.size()), temperature};
  double total = 0.0;
  for (std::size_t i = 0; i < lr.size(); ++i) {
    out.weights[i] = std::exp(lr[i] / temperature - top);
    total += out.weights[i];
  }
  const double n = static_cast<double>(lr.size());
  for (double& w : out.weights) w = n * w / total;
  return out;
}

std::vector<double> epoch_weights(const LossHistory& history, int epoch, double temperature) {
  const std::size_t n = history.task_count();
  if (epoch <= history.warmup_epoch()) return std::vector<double>(n, 1.0);
  std::vector<double> lr(n);
  const auto& warm = history.at(history.warmup_epoch());
  for (std::size_t i = 0; i < n; ++i) {
    lr[i] = warm[i] < kMinWarmupLoss ? 1.0 : learning_rate_ratio(history, i, epoch);
  }
  return eccentric_vector(lr, temperature).weights;
}

namespace {

BalancedGradient skipped_result(std::size_t m, std::vector<double> weights) {
  BalancedGradient out;
  out.joint.assign(m, 0.0);
  out.skipped = true;
  out.weights = std::move(weights);
  return out;
}

// Aligned rows recombined with `weights`, summed in task order.
BalancedGradient aligned_combination(const GradientMatrix& g, std::vector<double> weights,
                                     linalg::RankTolerance tol) {
  linalg::Alignment al;
  try {
    al = linalg::project_align(g.matrix(), tol);
  } catch (const DegenerateGradient&) {
    return skipped_result(g.param_count(), std::move(weights));
  }
  BalancedGradient out;
  out.joint.assign(g.param_count(), 0.0);
  for (std::size_t i = 0; i < g.task_count(); ++i) {
    simd::axpy(weights[i], al.aligned.row(i), out.joint);
  }
  out.sigma_min = al.sigma_min;
  out.rank = al.rank;
  out.weights = std::move(weights);
  return out;
}

}  // namespace

BalancedGradient ega_step(const GradientMatrix& g, const LossHistory& history, int epoch,
                          double temperature, linalg::RankTolerance tol) {
  if (history.task_count() != g.task_count()) {
    throw InvalidInput("ega_step: history and gradient task counts differ");
  }
  return aligned_combination(g, epoch_weights(history, epoch, temperature), tol);
}

BalancedGradient ortho_only_step(const GradientMatrix& g, linalg::RankTolerance tol) {
  return aligned_combination(g, std::vector<double>(g.task_count(), 1.0), tol);
}

BalancedGradient equal_weight_step(const GradientMatrix& g) {
  BalancedGradient out;
  out.joint.assign(g.param_count(), 0.0);
  for (std::size_t i = 0; i < g.task_count(); ++i) simd::axpy(1.0, g.task(i), out.joint);
  out.weights.assign(g.task_count(), 1.0);
  out.rank = g.task_count();
  return out;
}

void apply_update_inplace(std::span<double> params, const BalancedGradient& g, double eta) {
  if (params.size() != g.joint.size()) {
    throw InvalidInput("apply_update: parameter and gradient sizes differ");
  }
  if (!(eta > 0.0)) throw InvalidInput("apply_update: step length must be positive");
  if (g.skipped) return;
  simd::axpy(-eta, g.joint, params);
}

std::vector<double> apply_update(std::span<const double> params, const BalancedGradient& g,
                                 double eta) {
  std::vector<double> out(params.begin(), params.end());
  apply_update_inplace(out, g, eta);
  return out;
}

namespace {

class EqualWeight final : public Strategy {
 public:
  std::string_view id() const noexcept override { return "equal_weight"; }
  BalancedGradient step(const GradientMatrix& g, const StepContext&) const override {
    return equal_weight_step(g);
  }
};

class OrthoOnly final : public Strategy {
 public:
  explicit OrthoOnly(double rank_tol) : tol_(linalg::RankTolerance::relative(rank_tol)) {}
  std::string_view id() const noexcept override { return "ortho_only"; }
  BalancedGradient step(const GradientMatrix& g, const StepContext&) const override {
    return ortho_only_step(g, tol_);
  }

 private:
  linalg::RankTolerance tol_;
};

class Eccentric final : public Strategy {
 public:
  explicit Eccentric(const StrategyParams& p)
      : temperature_(p.temperature), tol_(linalg::RankTolerance::relative(p.rank_tol)) {}
  std::string_view id() const noexcept override { return "ega"; }
  BalancedGradient step(const GradientMatrix& g, const StepContext& ctx) const override {
    if (ctx.history == nullptr) throw PreconditionError("ega: no loss history supplied");
    return ega_step(g, *ctx.history, ctx.epoch, temperature_, tol_);
  }

 private:
  double temperature_;
  linalg::RankTolerance tol_;
};

}  // namespace

std::vector<std::string> strategy_ids() { return {"equal_weight", "ortho_only", "ega"}; }

std::unique_ptr<Strategy> make_strategy(std::string_view id, const StrategyParams& params) {
  if (!(params.rank_tol >= 0.0)) throw InvalidConfig("rank_tol must be >= 0");
  if (id == "equal_weight") return std::make_unique<EqualWeight>();
  if (id == "ortho_only") return std::make_unique<OrthoOnly>(params.rank_tol);
  if (id == "ega") {
    if (!(params.temperature > 0.0)) throw InvalidConfig("ega: temperature must be positive");
    return std::make_unique<Eccentric>(params);
  }
  throw InvalidConfig("unknown strategy id '" + std::string(id) + "'");
}

}  // namespace ega::balance
