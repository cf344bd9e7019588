#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <set>

#include "ega/error.hpp"
#include "ega/harness.hpp"
#include "ega/simd.hpp"
#include "ega/textio.hpp"

namespace ega::harness {

namespace {

net::ModelConfig model_config(const ExperimentConfig& c) {
  net::ModelConfig m = c.model;
  m.input_dim = static_cast<std::size_t>(std::llround(c.segments.window_s * c.synth.fs)) / c.feature_pool;
  m.waveform_dim = c.segments.target_length;
  m.anchor_classes = c.segments.anchor_classes;
  m.length_classes = c.segments.length_bins.count();
  return m;
}

std::uint64_t hash_params(std::span<const double> p) {
  return textio::fnv1a(std::string_view(reinterpret_cast<const char*>(p.data()), p.size_bytes()));
}

double reported_temperature(const ExperimentConfig& c) {
  return c.strategy == "ega" ? c.strategy_params.temperature : 0.0;
}

// Fisher-Yates driven by raw engine output, so the order is the same with
// every standard library.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

struct Progress {
  std::vector<TaskArray> losses, val_losses, grad_norms;
  std::vector<std::uint64_t> trunk_hash;
  std::size_t updates = 0, skipped = 0;
};

// One training run. `only_task` restricts the trunk update to that task's
// gradient (single-task baseline).
net::Model run_training(const ExperimentConfig& config, const Dataset& data, std::optional<std::size_t> only_task,
                        Progress& prog, const EpochHook& hook) {
  auto model = net::Model::create(model_config(config), derive_seed(config.seed, "model"));
  std::unique_ptr<balance::Strategy> strategy;
  if (!only_task) strategy = balance::make_strategy(config.strategy, config.strategy_params);
  net::HeadOptimizer heads(config.eta, config.momentum, config.weight_decay);
  balance::LossHistory history(net::kTaskCount, config.strategy_params.warmup_epoch);
  std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));

  const bool scaled = std::any_of(config.gradient_scale.begin(), config.gradient_scale.end(),
                                  [](double s) { return s != 1.0; });
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    TaskArray loss_sum{}, norm_sum{};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      const auto batch = make_batch(data.train, std::span(order).subspan(start, end - start));
      auto grads = net::per_task_gradients(model, batch);
      if (scaled) {
        linalg::Matrix g = grads.trunk.matrix();
        for (std::size_t t = 0; t < net::kTaskCount; ++t) simd::scale(config.gradient_scale[t], g.row(t));
        grads.trunk = balance::GradientMatrix(std::move(g));
      }
      for (std::size_t t = 0; t < net::kTaskCount; ++t) {
        loss_sum[t] += grads.losses.values[t] * static_cast<double>(batch.size());
        norm_sum[t] += std::sqrt(simd::sum_squares(grads.trunk.task(t)));
      }

      balance::BalancedGradient step;
      if (only_task) {
        auto row = grads.trunk.task(*only_task);
        step.joint.assign(row.begin(), row.end());
      } else {
        step = strategy->step(grads.trunk, {&history, epoch});
      }
      ++prog.updates;
      if (step.skipped) {
        ++prog.skipped;
      } else {
        balance::apply_update_inplace(model.trunk.params(), step, config.eta);
      }
      heads.step(model, grads.heads);
      ++batches;
    }

    TaskArray mean{}, norms{};
    std::vector<double> record(net::kTaskCount);
    for (std::size_t t = 0; t < net::kTaskCount; ++t) {
      mean[t] = loss_sum[t] / static_cast<double>(order.size());
      norms[t] = norm_sum[t] / static_cast<double>(batches);
      record[t] = mean[t];
    }
    history.record(epoch, std::move(record));
    prog.losses.push_back(mean);
    prog.grad_norms.push_back(norms);
    prog.val_losses.push_back(data.val.empty() ? TaskArray{NAN, NAN, NAN}
                                               : evaluate(model, data.val, config).loss);
    prog.trunk_hash.push_back(hash_params(model.trunk.params()));
    if (hook) hook(epoch, model.trunk.params());
  }
  return model;
}

std::string run_id(const ExperimentConfig& c) { return textio::hex64(c.hash()); }

}  // namespace

std::vector<metrics::ReportRow> RunRecord::rows(const NoiseProtocol& noise) const {
  std::vector<metrics::ReportRow> out;
  const double db = noise.type == NoiseType::None ? 0.0 : noise.snr_db;
  for (const auto& [key, value] : test.values)
    out.push_back({run_id, seed, strategy, temperature, noise.label(), db, std::string(task_name(key.first)),
                   key.second, value});
  if (noise.type == NoiseType::None)
    out.push_back({run_id, seed, strategy, temperature, noise.label(), db, "trunk", "skipped_updates",
                   static_cast<double>(skipped_updates)});
  return out;
}

TrainedRun train_model(const ExperimentConfig& config, const Dataset& data, const EpochHook& hook) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainedRun run;
  RunRecord& rec = run.record;
  rec.run_id = run_id(config);
  rec.config_hash = config.hash();
  rec.seed = config.seed;
  rec.strategy = config.strategy;
  rec.temperature = reported_temperature(config);
  rec.train_hash = data.train_hash;

  if (config.strategy == "single_task") {
    std::array<Progress, net::kTaskCount> progs;
    for (std::size_t t = 0; t < net::kTaskCount; ++t)
      run.models.push_back(run_training(config, data, t, progs[t], t == 0 ? hook : EpochHook{}));
    for (int e = 0; e < config.epochs; ++e) {
      TaskArray l{}, v{}, g{};
      std::string hashes;
      for (std::size_t t = 0; t < net::kTaskCount; ++t) {
        l[t] = progs[t].losses[e][t];
        v[t] = progs[t].val_losses[e][t];
        g[t] = progs[t].grad_norms[e][t];
        hashes += textio::hex64(progs[t].trunk_hash[e]);
      }
      rec.epoch_losses.push_back(l);
      rec.epoch_val_losses.push_back(v);
      rec.epoch_grad_norms.push_back(g);
      rec.epoch_trunk_hash.push_back(textio::fnv1a(hashes));
    }
    for (const auto& p : progs) {
      rec.updates += p.updates;
      rec.skipped_updates += p.skipped;
    }
  } else {
    Progress prog;
    run.models.push_back(run_training(config, data, std::nullopt, prog, hook));
    rec.epoch_losses = std::move(prog.losses);
    rec.epoch_val_losses = std::move(prog.val_losses);
    rec.epoch_grad_norms = std::move(prog.grad_norms);
    rec.epoch_trunk_hash = std::move(prog.trunk_hash);
    rec.updates = prog.updates;
    rec.skipped_updates = prog.skipped;
  }
  rec.test = evaluate(run, data.test, config);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

RunRecord train(const ExperimentConfig& config) { return train_model(config, build_dataset(config)).record; }

// ---------------------------------------------------------------------------
// Noise sweep

namespace {

NoiseEvaluation evaluate_noisy(const TrainedRun& run, const Dataset& data, const ExperimentConfig& config,
                               const NoiseProtocol& p, std::size_t level) {
  NoiseEvaluation out;
  out.protocol = p;
  const std::string tag = "noise/" + p.label() + "/" + textio::format_real(p.snr_db);
  std::vector<Sample> samples;

  if (p.type == NoiseType::Abrupt) {
    std::vector<synth::Segment> segs;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (data.roles[i] != SplitRole::Test) continue;
      for (auto& s : synth::segment(data.records[i], config.segments))
        if (s.labeled) segs.push_back(std::move(s));
    }
    std::vector<std::vector<double>> windows;
    for (const auto& s : segs) windows.push_back(s.window);
    const auto bursts = synth::add_abrupt_noise(windows, config.synth.fs, p.fraction, p.duration_s, p.snr_db,
                                                derive_seed(config.seed, tag, level));
    out.windows = windows.size();
    out.doped = bursts.size();
    for (std::size_t k = 0; k < segs.size(); ++k) {
      Sample s;
      s.features = window_features(windows[k], config.feature_pool);
      s.waveform = segs[k].ecg_target;
      s.anchor_classes = segs[k].anchor_classes;
      s.anchor_times = segs[k].anchor_times;
      s.length_class = segs[k].ppi_class;
      s.ppi = segs[k].ppi;
      samples.push_back(std::move(s));
    }
  } else {
    double worst = NAN;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (data.roles[i] != SplitRole::Test) continue;
      synth::SyntheticRecord noisy = data.records[i];
      if (p.type == NoiseType::Constant) {
        noisy.radar = synth::add_constant_noise(noisy.radar, p.snr_db, derive_seed(config.seed, tag, i));
        noisy.noise = {"constant", p.snr_db, {}};
        const double snr = synth::measured_snr_db(data.records[i].radar, noisy.radar);
        if (std::isnan(worst) || std::abs(snr - p.snr_db) > std::abs(worst - p.snr_db)) worst = snr;
      }
      auto s = record_samples(noisy, config);
      std::move(s.begin(), s.end(), std::back_inserter(samples));
    }
    out.windows = samples.size();
    if (p.type == NoiseType::Constant) {
      out.realized_snr_db = worst;
      out.doped = samples.size();
    }
  }

  out.eval = evaluate(run, samples, config);
  const auto specs = delta_specs();
  const auto d = metrics::delta_m(out.eval.values, run.record.test.values, specs);
  out.delta_m = d.percent;
  out.excluded = d.excluded;
  out.train_hash = hash_training(data);
  return out;
}

}  // namespace

std::vector<metrics::ReportRow> SweepResult::rows() const {
  auto out = base.rows();
  for (const auto& lv : levels) {
    RunRecord view = base;
    view.test = lv.eval;
    auto r = view.rows(lv.protocol);
    const double db = lv.protocol.type == NoiseType::None ? 0.0 : lv.protocol.snr_db;
    r.push_back({base.run_id, base.seed, base.strategy, base.temperature, lv.protocol.label(), db, "all",
                 "delta_m_pct", lv.delta_m});
    if (lv.realized_snr_db)
      r.push_back({base.run_id, base.seed, base.strategy, base.temperature, lv.protocol.label(), db, "input",
                   "realized_snr_db", *lv.realized_snr_db});
    if (lv.protocol.type == NoiseType::Abrupt)
      r.push_back({base.run_id, base.seed, base.strategy, base.temperature, lv.protocol.label(), db, "input",
                   "doped_windows", static_cast<double>(lv.doped)});
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

SweepResult noise_sweep(const ExperimentConfig& config, std::span<const NoiseProtocol> protocols) {
  const Dataset data = build_dataset(config);
  const auto trained = train_model(config, data);
  SweepResult out;
  out.base = trained.record;
  for (std::size_t k = 0; k < protocols.size(); ++k) {
    out.levels.push_back(evaluate_noisy(trained, data, config, protocols[k], k));
    if (out.levels.back().train_hash != trained.record.train_hash)
      throw Error("noise sweep modified the training data");
  }
  std::vector<const NoiseEvaluation*> constant;
  for (const auto& lv : out.levels)
    if (lv.protocol.type == NoiseType::Constant) constant.push_back(&lv);
  std::stable_sort(constant.begin(), constant.end(), [](auto* a, auto* b) {
    return a->protocol.snr_db > b->protocol.snr_db;
  });
  for (std::size_t k = 1; k < constant.size(); ++k)
    if (constant[k]->delta_m > constant[k - 1]->delta_m) out.monotone = false;
  return out;
}

// ---------------------------------------------------------------------------
// Strategy comparison

namespace {

std::vector<RunRecord> repeated_runs(const ExperimentConfig& base, const std::string& strategy) {
  std::vector<RunRecord> runs;
  for (std::size_t r = 0; r < base.repeats; ++r) {
    ExperimentConfig c = base;
    c.strategy = strategy;
    c.seed = base.seed + r;
    runs.push_back(train(c));
  }
  return runs;
}

std::vector<double> metric_samples(const std::vector<RunRecord>& runs, const metrics::MetricKey& key) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.test.values.at(key));
  return v;
}

metrics::MetricValues mean_values(const std::vector<RunRecord>& runs) {
  metrics::MetricValues out;
  for (const auto& [key, _] : runs.front().test.values) out[key] = metrics::summarize(metric_samples(runs, key)).mean;
  return out;
}

}  // namespace

Comparison compare_strategies(const ExperimentConfig& config, std::span<const std::string> strategies,
                              const std::string& baseline) {
  if (strategies.empty()) throw InvalidConfig("compare: no strategies given");
  ExperimentConfig check = config;
  for (const auto& s : strategies) {
    check.strategy = s;
    check.validate();
  }
  check.strategy = baseline;
  check.validate();

  std::map<std::string, std::vector<RunRecord>> cache;
  auto runs_for = [&](const std::string& s) -> const std::vector<RunRecord>& {
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, repeated_runs(config, s)).first;
    return it->second;
  };

  const auto& base_runs = runs_for(baseline);
  const auto base_means = mean_values(base_runs);
  const auto specs = delta_specs();

  Comparison cmp;
  cmp.baseline = baseline;
  for (const auto& s : strategies) {
    StrategySummary sum;
    sum.strategy = s;
    sum.runs = runs_for(s);
    for (const auto& [key, _] : sum.runs.front().test.values) {
      const auto mine = metric_samples(sum.runs, key);
      sum.metrics[key] = metrics::summarize(mine);
      if (config.repeats >= 2)
        if (auto w = metrics::welch_t(mine, metric_samples(base_runs, key))) sum.p_values[key] = w->p;
    }
    sum.delta_m_of_means = metrics::delta_m(mean_values(sum.runs), base_means, specs).percent;
    std::vector<double> per_repeat;
    for (const auto& r : sum.runs) per_repeat.push_back(metrics::delta_m(r.test.values, base_means, specs).percent);
    sum.delta_m = metrics::summarize(per_repeat);
    for (const auto& r : sum.runs) sum.skipped_updates += r.skipped_updates;
    cmp.strategies.push_back(std::move(sum));
  }
  return cmp;
}

std::vector<metrics::ReportRow> Comparison::rows() const {
  std::vector<const RunRecord*> runs;
  std::set<std::string> seen;
  for (const auto& s : strategies)
    for (const auto& r : s.runs)
      if (seen.insert(r.run_id).second) runs.push_back(&r);
  std::stable_sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->run_id < b->run_id; });
  std::vector<metrics::ReportRow> out;
  for (const auto* r : runs) {
    auto rows = r->rows();
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace ega::harness
