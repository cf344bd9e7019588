#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ega/balance.hpp"
#include "ega/metrics.hpp"
#include "ega/net.hpp"
#include "ega/synth.hpp"

namespace ega::harness {

using TaskArray = std::array<double, net::kTaskCount>;

std::string_view task_name(std::size_t task);

enum class NoiseType { None, Constant, Abrupt };

struct NoiseProtocol {
  NoiseType type = NoiseType::None;
  double snr_db = 0.0;
  double fraction = 0.2;    // abrupt only
  double duration_s = 1.0;  // abrupt only

  /// Value of the noise_type report column: "none", "constant" or
  /// "abrupt_f<fraction>_d<duration>".
  std::string label() const;
  friend bool operator==(const NoiseProtocol&, const NoiseProtocol&) = default;
};

/// Constant SNRs {6, 3, 0, -1, -2, -3} dB followed by abrupt bursts on 20% of
/// the windows, 1 to 3 s long, at 0 and -9 dB.
std::vector<NoiseProtocol> standard_noise_grid();

/// Strategy ids accepted by the harness: the balance strategies plus
/// "single_task" (one run per task, trunk driven by that task alone).
std::vector<std::string> harness_strategy_ids();

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int epochs = 60;
  std::size_t batch_size = 32;
  std::size_t repeats = 5;

  std::string strategy = "ega";
  balance::StrategyParams strategy_params;
  std::vector<std::string> compare{"equal_weight", "ortho_only", "ega"};
  std::string baseline = "equal_weight";

  double eta = 5e-3;
  double momentum = 0.937;
  double weight_decay = 5e-4;

  std::size_t records = 40;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  synth::SynthConfig synth;
  synth::SegmentOptions segments;
  std::size_t feature_pool = 4;
  net::ModelConfig model;

  /// Multiplies each task's row of the trunk gradient matrix before the
  /// strategy sees it. Lets a benchmark make one task dominate.
  TaskArray gradient_scale{1.0, 1.0, 1.0};

  std::vector<NoiseProtocol> noise;

  /// Throws InvalidConfig on out-of-range values or unknown strategy ids.
  void validate() const;
  /// Stable JSON rendering of every field.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys,
/// wrong types and invalid values throw InvalidConfig.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Independent stream seed for (seed, tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

// ---------------------------------------------------------------------------
// Data

struct Sample {
  std::vector<double> features;
  std::vector<double> waveform;
  std::vector<std::size_t> anchor_classes;
  std::vector<double> anchor_times;
  std::size_t length_class = 0;
  double ppi = 0.0;
};

enum class SplitRole { Train, Val, Test };
std::string_view split_name(SplitRole role);

struct Dataset {
  std::vector<synth::SyntheticRecord> records;
  std::vector<SplitRole> roles;  // per record
  std::vector<Sample> train, val, test;
  /// Hash of the training traces and features.
  std::uint64_t train_hash = 0;
};

/// Record i uses seed derive_seed(seed, "record", i). The last records go to
/// test, the ones before them to validation.
Dataset build_dataset(const ExperimentConfig& config);
std::vector<SplitRole> split_roles(const ExperimentConfig& config);

/// Pooled RMS envelope of the window, standardized to zero mean and unit
/// variance.
std::vector<double> window_features(std::span<const double> window, std::size_t pool);

/// Labeled segments of a record as samples.
std::vector<Sample> record_samples(const synth::SyntheticRecord& record, const ExperimentConfig& config);

std::uint64_t hash_training(const Dataset& data);

net::Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Evaluation

/// Local maxima of softmax(logits) at least half the peak probability, kept
/// greedily by probability with `min_separation` classes between them.
/// Returns class indices in increasing order.
std::vector<std::size_t> decode_anchors(std::span<const double> logits, std::size_t min_separation = 20);

struct Evaluation {
  TaskArray loss{};
  metrics::MetricValues values;
};

/// Metric names per task: waveform {loss, rmse, pcc, r2}, anchor {loss, mdr,
/// timing_error_ms}, length {loss, ppi_error_ms}. Aggregates that are
/// undefined on this data come back as NaN.
Evaluation evaluate(const net::Model& model, std::span<const Sample> samples, const ExperimentConfig& config);

/// Metrics entering the aggregate relative change.
std::vector<metrics::MetricSpec> delta_specs();

// ---------------------------------------------------------------------------
// Runs

struct RunRecord {
  std::string run_id;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string strategy;
  double temperature = 0.0;

  std::vector<TaskArray> epoch_losses;      // training mean per epoch
  std::vector<TaskArray> epoch_val_losses;
  /// Mean per-task trunk gradient norm per epoch, after gradient_scale.
  std::vector<TaskArray> epoch_grad_norms;
  std::vector<std::uint64_t> epoch_trunk_hash;

  std::size_t updates = 0;
  std::size_t skipped_updates = 0;
  std::uint64_t train_hash = 0;
  Evaluation test;
  double seconds = 0.0;

  /// One report row per test metric plus the skipped-update count, sorted.
  std::vector<metrics::ReportRow> rows(const NoiseProtocol& noise = {}) const;
};

struct TrainedRun {
  RunRecord record;
  /// One model, or one per task for single_task.
  std::vector<net::Model> models;
};

/// Evaluates a run's model(s); single_task runs take each task's metrics
/// from that task's model.
Evaluation evaluate(const TrainedRun& run, std::span<const Sample> samples, const ExperimentConfig& config);

/// Called after every epoch with the trunk parameters.
using EpochHook = std::function<void(int epoch, std::span<const double> trunk)>;

TrainedRun train_model(const ExperimentConfig& config, const Dataset& data, const EpochHook& hook = {});
RunRecord train(const ExperimentConfig& config);

struct NoiseEvaluation {
  NoiseProtocol protocol;
  Evaluation eval;
  double delta_m = 0.0;
  std::vector<metrics::MetricKey> excluded;
  std::optional<double> realized_snr_db;  // constant noise, worst test record
  std::size_t windows = 0;
  std::size_t doped = 0;
  std::uint64_t train_hash = 0;
};

struct SweepResult {
  RunRecord base;
  std::vector<NoiseEvaluation> levels;
  /// Whether delta_m never rises as constant-noise SNR drops.
  bool monotone = true;

  std::vector<metrics::ReportRow> rows() const;
};

/// Trains once on clean data, then evaluates noisy copies of the test set.
/// Throws Error if the training data hash changes during the sweep.
SweepResult noise_sweep(const ExperimentConfig& config, std::span<const NoiseProtocol> protocols);

struct StrategySummary {
  std::string strategy;
  std::vector<RunRecord> runs;
  std::map<metrics::MetricKey, metrics::Summary> metrics;
  std::map<metrics::MetricKey, double> p_values;  // absent when undefined
  metrics::Summary delta_m;                        // per-repeat against baseline means
  double delta_m_of_means = 0.0;
  std::size_t skipped_updates = 0;
};

struct Comparison {
  std::string baseline;
  std::vector<StrategySummary> strategies;  // in request order
  std::vector<metrics::ReportRow> rows() const;
};

/// Runs every strategy for config.repeats seeds (seed, seed + 1, ...).
/// The baseline is run too when it is not in the list.
Comparison compare_strategies(const ExperimentConfig& config, std::span<const std::string> strategies,
                              const std::string& baseline);

// ---------------------------------------------------------------------------
// Text output

void print_run(const RunRecord& run, std::ostream& out);
void print_comparison(const Comparison& cmp, std::ostream& out);
void print_sweep(const SweepResult& sweep, std::ostream& out);
void write_epoch_losses(const RunRecord& run, std::ostream& out);

/// Mean and CI of every (strategy, T, noise_type, noise_db, task, metric)
/// group of exported rows.
void print_report(std::span<const metrics::ReportRow> rows, std::ostream& out);

}  // namespace ega::harness
