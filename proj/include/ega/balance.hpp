#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ega/linalg.hpp"

namespace ega::balance {

/// Per-task gradients with respect to the shared parameters, one row per task.
class GradientMatrix {
 public:
  /// Throws InvalidInput unless rows >= 2, cols >= 1 and all entries finite.
  explicit GradientMatrix(linalg::Matrix rows);

  std::size_t task_count() const noexcept { return m_.rows(); }
  std::size_t param_count() const noexcept { return m_.cols(); }
  std::span<const double> task(std::size_t i) const { return m_.row(i); }
  const linalg::Matrix& matrix() const noexcept { return m_; }

 private:
  linalg::Matrix m_;
};

/// Mean epoch losses per task. Epochs are 1-based; the entry recorded at the
/// warmup epoch becomes the reference for learning-rate ratios.
class LossHistory {
 public:
  LossHistory(std::size_t task_count, int warmup_epoch);

  /// Appends epoch losses. Throws InvalidInput for wrong arity, negative or
  /// non-finite values, or a non-increasing epoch index.
  void record(int epoch, std::vector<double> losses);

  std::size_t task_count() const noexcept { return task_count_; }
  int warmup_epoch() const noexcept { return warmup_epoch_; }
  bool has(int epoch) const { return losses_.contains(epoch); }
  /// Throws PreconditionError when the epoch has not been recorded.
  const std::vector<double>& at(int epoch) const;
  const std::map<int, std::vector<double>>& entries() const noexcept { return losses_; }

 private:
  std::size_t task_count_;
  int warmup_epoch_;
  std::map<int, std::vector<double>> losses_;
};

/// Loss ratio L_i(epoch-1) / L_i(t_warm); small values mean fast learning.
/// Throws PreconditionError for epoch <= t_warm or missing entries, and
/// DegenerateHistory when the warmup loss is below kMinWarmupLoss.
double learning_rate_ratio(const LossHistory& history, std::size_t task, int epoch);

inline constexpr double kMinWarmupLoss = 1e-12;

/// Task-difficulty weights k_i = n softmax(lr / T)_i.
struct EccentricVector {
  std::vector<double> weights;
  double temperature = 1.0;
};

/// Throws InvalidConfig when T <= 0 or not finite and InvalidInput for
/// non-finite ratios.
EccentricVector eccentric_vector(std::span<const double> lr, double temperature);

/// Weights used by EGA during `epoch`: all ones up to and including the
/// warmup epoch, the eccentric vector of the previous epoch's ratios after.
/// Tasks whose warmup loss is below kMinWarmupLoss get a pinned ratio of 1.
std::vector<double> epoch_weights(const LossHistory& history, int epoch,
                                  double temperature);

struct BalancedGradient {
  std::vector<double> joint;
  /// Set when the strategy produced no usable direction (zero gradients);
  /// the caller skips the update and `joint` is all zeros.
  bool skipped = false;
  double sigma_min = 0.0;
  std::size_t rank = 0;
  std::vector<double> weights;
};

BalancedGradient ega_step(const GradientMatrix& g, const LossHistory& history,
                          int epoch, double temperature,
                          linalg::RankTolerance tol = linalg::RankTolerance::standard());

BalancedGradient equal_weight_step(const GradientMatrix& g);

BalancedGradient ortho_only_step(const GradientMatrix& g,
                                 linalg::RankTolerance tol = linalg::RankTolerance::standard());

/// theta - eta * g. Throws InvalidInput on size mismatch or eta <= 0.
std::vector<double> apply_update(std::span<const double> params,
                                 const BalancedGradient& g, double eta);
/// In-place variant.
void apply_update_inplace(std::span<double> params, const BalancedGradient& g,
                          double eta);

// ---------------------------------------------------------------------------
// Strategy interface

struct StrategyParams {
  double temperature = 1.0;
  int warmup_epoch = 4;
  double rank_tol = 1e-8;  // relative to the largest singular value
};

/// Everything a strategy may look at besides the gradients.
struct StepContext {
  const LossHistory* history = nullptr;
  int epoch = 1;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string_view id() const noexcept = 0;
  virtual BalancedGradient step(const GradientMatrix& g, const StepContext& ctx) const = 0;
};

/// Known ids: "equal_weight", "ortho_only", "ega".
/// Throws InvalidConfig for anything else.
std::unique_ptr<Strategy> make_strategy(std::string_view id, const StrategyParams& params);
std::vector<std::string> strategy_ids();

}  // namespace ega::balance
