#include <algorithm>
#include <cmath>
#include <numeric>

#include "ega/error.hpp"
#include "ega/harness.hpp"
#include "ega/textio.hpp"

namespace ega::harness {

std::string_view split_name(SplitRole role) {
  switch (role) {
    case SplitRole::Train: return "train";
    case SplitRole::Val: return "val";
    case SplitRole::Test: return "test";
  }
  return "train";
}

std::vector<SplitRole> split_roles(const ExperimentConfig& config) {
  const auto n = static_cast<double>(config.records);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.test_fraction * n)));
  const auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * n));
  std::vector<SplitRole> roles(config.records, SplitRole::Train);
  for (std::size_t i = 0; i < config.records; ++i) {
    if (i + n_test >= config.records) {
      roles[i] = SplitRole::Test;
    } else if (i + n_test + n_val >= config.records) {
      roles[i] = SplitRole::Val;
    }
  }
  return roles;
}

std::vector<double> window_features(std::span<const double> window, std::size_t pool) {
  auto f = synth::pooled_rms(window, pool);
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : f) v = (v - mean) * inv;
  return f;
}

namespace {

Sample to_sample(const synth::Segment& seg, std::span<const double> window, std::size_t pool) {
  Sample s;
  s.features = window_features(window, pool);
  s.waveform = seg.ecg_target;
  s.anchor_classes = seg.anchor_classes;
  s.anchor_times = seg.anchor_times;
  s.length_class = seg.ppi_class;
  s.ppi = seg.ppi;
  return s;
}

void hash_doubles(std::uint64_t& h, std::span<const double> v) {
  h = textio::fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()), v.size_bytes()), h);
}

}  // namespace

std::vector<Sample> record_samples(const synth::SyntheticRecord& record, const ExperimentConfig& config) {
  std::vector<Sample> out;
  for (const auto& seg : synth::segment(record, config.segments))
    if (seg.labeled) out.push_back(to_sample(seg, seg.window, config.feature_pool));
  return out;
}

Dataset build_dataset(const ExperimentConfig& config) {
  config.validate();
  Dataset d;
  d.roles = split_roles(config);
  d.records.reserve(config.records);
  for (std::size_t i = 0; i < config.records; ++i) {
    d.records.push_back(synth::make_record(derive_seed(config.seed, "record", i), config.synth));
    auto samples = record_samples(d.records.back(), config);
    auto& dst = d.roles[i] == SplitRole::Train ? d.train : d.roles[i] == SplitRole::Val ? d.val : d.test;
    std::move(samples.begin(), samples.end(), std::back_inserter(dst));
  }
  if (d.train.empty() || d.test.empty()) throw InvalidConfig("dataset has no labeled train or test windows");
  d.train_hash = hash_training(d);
  return d;
}

std::uint64_t hash_training(const Dataset& data) {
  std::uint64_t h = textio::fnv1a("train");
  for (std::size_t i = 0; i < data.records.size(); ++i)
    if (data.roles[i] == SplitRole::Train) hash_doubles(h, data.records[i].radar);
  for (const auto& s : data.train) {
    hash_doubles(h, s.features);
    hash_doubles(h, s.waveform);
  }
  return h;
}

net::Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InvalidInput("make_batch: empty batch");
  const auto& first = samples[indices[0]];
  net::Batch b;
  b.inputs = linalg::Matrix(indices.size(), first.features.size());
  b.waveform = linalg::Matrix(indices.size(), first.waveform.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& s = samples[indices[r]];
    if (s.features.size() != b.inputs.cols() || s.waveform.size() != b.waveform.cols())
      throw InvalidInput("make_batch: ragged samples");
    std::copy(s.features.begin(), s.features.end(), b.inputs.row(r).begin());
    std::copy(s.waveform.begin(), s.waveform.end(), b.waveform.row(r).begin());
    b.anchors.push_back(s.anchor_classes);
    b.length_class.push_back(s.length_class);
  }
  return b;
}

std::vector<std::size_t> decode_anchors(std::span<const double> logits, std::size_t min_separation) {
  const std::size_t n = logits.size();
  if (n == 0) return {};
  // Softmax is monotone, so the half-peak test can run on logits shifted by log 2.
  const double top = *std::max_element(logits.begin(), logits.end());
  const double floor = top - std::log(2.0);
  std::vector<std::size_t> peaks;
  for (std::size_t c = 0; c < n; ++c) {
    const double v = logits[c];
    if (v < floor) continue;
    if (c > 0 && logits[c - 1] > v) continue;
    if (c + 1 < n && logits[c + 1] >= v) continue;
    peaks.push_back(c);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : peaks) {
    bool clear = true;
    for (std::size_t k : kept)
      if ((c > k ? c - k : k - c) < min_separation) clear = false;
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<metrics::MetricSpec> delta_specs() {
  using metrics::Direction;
  return {{0, "rmse", Direction::LowerBetter},
          {0, "pcc", Direction::HigherBetter},
          {1, "mdr", Direction::LowerBetter},
          {1, "timing_error_ms", Direction::LowerBetter},
          {2, "ppi_error_ms", Direction::LowerBetter}};
}

namespace {

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return NAN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct TaskAccum {
  std::array<double, net::kTaskCount> loss_sum{};
  std::vector<double> rmse, pcc, r2;
  std::size_t anchors_total = 0, anchors_missed = 0;
  std::vector<double> timing_s;
  std::vector<double> ppi_true_ms, ppi_pred_ms;
};

void accumulate(const net::Model& model, std::span<const Sample> samples, const ExperimentConfig& config,
                TaskAccum& acc, const std::array<bool, net::kTaskCount>& want) {
  constexpr std::size_t kChunk = 128;
  const double class_width = config.segments.window_s / static_cast<double>(config.segments.anchor_classes);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) idx.push_back(i);
    const auto batch = make_batch(samples, idx);
    const auto pass = net::forward(model, batch.inputs);
    const auto losses = net::task_losses(pass, batch);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Sample& s = samples[idx[r]];
      if (want[0]) {
        auto pred = pass.prediction(0).row(r);
        acc.rmse.push_back(metrics::rmse(s.waveform, pred));
        if (auto p = metrics::pcc(s.waveform, pred)) acc.pcc.push_back(*p);
        if (auto q = metrics::r_squared(s.waveform, pred)) acc.r2.push_back(*q);
      }
      if (want[1]) {
        std::vector<double> times;
        for (std::size_t c : decode_anchors(pass.prediction(1).row(r)))
          times.push_back((static_cast<double>(c) + 0.5) * class_width);
        if (auto m = metrics::anchor_match(s.anchor_times, times)) {
          acc.anchors_total += s.anchor_times.size();
          acc.anchors_missed += s.anchor_times.size() - m->errors.size();
          acc.timing_s.insert(acc.timing_s.end(), m->errors.begin(), m->errors.end());
        }
      }
      if (want[2]) {
        auto logits = pass.prediction(2).row(r);
        const auto cls = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        acc.ppi_true_ms.push_back(1000.0 * s.ppi);
        acc.ppi_pred_ms.push_back(1000.0 * config.segments.length_bins.center(cls));
      }
    }
    for (std::size_t t = 0; t < net::kTaskCount; ++t)
      if (want[t]) acc.loss_sum[t] += losses.values[t] * static_cast<double>(idx.size());
  }
}

}  // namespace

Evaluation evaluate(const net::Model& model, std::span<const Sample> samples, const ExperimentConfig& config) {
  TrainedRun run;
  run.models.push_back(model);
  return evaluate(run, samples, config);
}

Evaluation evaluate(const TrainedRun& run, std::span<const Sample> samples, const ExperimentConfig& config) {
  if (samples.empty()) throw InvalidInput("evaluate: no samples");
  if (run.models.size() != 1 && run.models.size() != net::kTaskCount)
    throw InvalidInput("evaluate: expected one model or one per task");
  Evaluation ev;
  TaskAccum acc;
  for (std::size_t mi = 0; mi < run.models.size(); ++mi) {
    std::array<bool, net::kTaskCount> want{};
    if (run.models.size() == 1) {
      want.fill(true);
    } else {
      want[mi] = true;
    }
    accumulate(run.models[mi], samples, config, acc, want);
  }
  const auto n = static_cast<double>(samples.size());
  for (std::size_t t = 0; t < net::kTaskCount; ++t) {
    ev.loss[t] = acc.loss_sum[t] / n;
    ev.values[{t, "loss"}] = ev.loss[t];
  }
  ev.values[{0, "rmse"}] = mean_or_nan(acc.rmse);
  ev.values[{0, "pcc"}] = mean_or_nan(acc.pcc);
  ev.values[{0, "r2"}] = mean_or_nan(acc.r2);
  ev.values[{1, "mdr"}] = acc.anchors_total == 0 ? NAN
                                                 : static_cast<double>(acc.anchors_missed) /
                                                       static_cast<double>(acc.anchors_total);
  ev.values[{1, "timing_error_ms"}] = 1000.0 * mean_or_nan(acc.timing_s);
  ev.values[{2, "ppi_error_ms"}] = metrics::ppi_error(acc.ppi_true_ms, acc.ppi_pred_ms);
  return ev;
}

}  // namespace ega::harness
