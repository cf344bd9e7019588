#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "ega/balance.hpp"
#include "ega/linalg.hpp"

// Shared-trunk network with three task heads and hand-written
// backpropagation. Task order everywhere: waveform, anchor, length.

namespace ega::net {

inline constexpr std::size_t kTaskCount = 3;

enum class Activation { Tanh, Identity };
enum class HeadKind { Waveform, Anchor, Length };

struct LayerSpec {
  std::size_t width;
  Activation activation;
};

/// Activations saved by Mlp::forward for the backward pass.
struct MlpCache {
  linalg::Matrix input;
  /// Post-activation output of every layer; outputs.back() is the MLP output.
  std::vector<linalg::Matrix> outputs;
};

/// Stack of fully-connected layers whose parameters live in one flat vector:
/// per layer the weight (width x fan_in, row-major) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, std::vector<LayerSpec> layers);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept;
  std::size_t param_count() const noexcept { return params_.size(); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::vector<double> flatten() const { return params_; }
  /// Throws InvalidInput on a size mismatch.
  void unflatten(std::span<const double> values);

  /// Glorot-uniform weights, zero biases.
  void init_glorot(std::mt19937_64& rng);

  MlpCache forward(const linalg::Matrix& x) const;
  /// Accumulates dLoss/dparams into `grad` (length param_count()) and returns
  /// dLoss/dinput.
  linalg::Matrix backward(const MlpCache& cache, const linalg::Matrix& d_out,
                          std::span<double> grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim_ : layers_[layer - 1].width;
  }

  std::size_t input_dim_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct ModelConfig {
  std::size_t input_dim = 200;
  std::vector<std::size_t> trunk_widths{64, 64};
  Activation trunk_activation = Activation::Tanh;
  /// Hidden width of every head; 0 gives a single linear layer.
  std::size_t head_hidden = 32;
  std::size_t waveform_dim = 200;
  std::size_t anchor_classes = 200;
  std::size_t length_classes = 100;

  std::size_t head_output(HeadKind kind) const noexcept;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Model {
  ModelConfig config;
  Mlp trunk;
  std::array<Mlp, kTaskCount> heads;

  /// Builds the architecture and initializes it from `seed`.
  static Model create(const ModelConfig& config, std::uint64_t seed);
};

struct Batch {
  linalg::Matrix inputs;    // B x input_dim
  linalg::Matrix waveform;  // B x waveform_dim
  /// Anchor class indices present in each sample's window (may be empty).
  std::vector<std::vector<std::size_t>> anchors;
  std::vector<std::size_t> length_class;

  std::size_t size() const noexcept { return inputs.rows(); }
};

/// Throws InvalidInput when the batch does not fit the model.
void validate(const Model& model, const Batch& batch);

struct ForwardPass {
  MlpCache trunk;
  std::array<MlpCache, kTaskCount> heads;
  const linalg::Matrix& prediction(std::size_t task) const { return heads[task].outputs.back(); }
};

ForwardPass forward(const Model& model, const linalg::Matrix& inputs);

struct TaskLosses {
  std::array<double, kTaskCount> values{};
  /// Samples with no anchor in their window; they add zero to the anchor loss.
  std::size_t empty_anchor_samples = 0;
};

/// Waveform: mean over samples of the per-sample RMSE. Anchor: mean over
/// samples of the cross-entropy averaged over the true anchor classes.
/// Length: mean single-label cross-entropy.
TaskLosses task_losses(const ForwardPass& pass, const Batch& batch);

/// Cross-entropy -log softmax(logits)[label].
double cross_entropy(std::span<const double> logits, std::size_t label);

struct Gradients {
  TaskLosses losses;
  /// Row i = dL_i / d(trunk params).
  balance::GradientMatrix trunk;
  /// Head i gradient of L_i alone.
  std::array<std::vector<double>, kTaskCount> heads;
};

inline constexpr double kRmseFloor = 1e-12;

Gradients per_task_gradients(const Model& model, const Batch& batch, const ForwardPass& pass);
Gradients per_task_gradients(const Model& model, const Batch& batch);

/// Classical momentum SGD with L2 decay folded into the gradient:
///   v <- momentum v + (g + decay w);  w <- w - eta v
class SgdMomentum {
 public:
  SgdMomentum(double eta, double momentum, double weight_decay);
  void step(std::span<double> weights, std::span<const double> grad);
  std::span<const double> velocity() const noexcept { return velocity_; }

 private:
  double eta_, momentum_, weight_decay_;
  std::vector<double> velocity_;
};

/// One optimizer per head, applied with each head's own gradient.
class HeadOptimizer {
 public:
  HeadOptimizer(double eta, double momentum, double weight_decay);
  void step(Model& model, const std::array<std::vector<double>, kTaskCount>& grads);

 private:
  std::array<SgdMomentum, kTaskCount> opt_;
};

// Checkpoints: versioned text, every parameter printed with 17 significant
// digits so a save/load round trip is exact.
void save_checkpoint(const Model& model, std::ostream& out);
Model load_checkpoint(std::istream& in);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ega::net
