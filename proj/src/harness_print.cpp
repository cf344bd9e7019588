#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <tuple>

#include "ega/harness.hpp"
#include "ega/textio.hpp"

namespace ega::harness {

namespace {

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pm(const metrics::Summary& s, int digits = 4) {
  if (s.count < 2) return fixed(s.mean, digits);
  return fixed(s.mean, digits) + " +/- " + fixed(s.ci95, digits);
}

std::string metric_label(const metrics::MetricKey& key) {
  return std::string(task_name(key.first)) + "." + key.second;
}

}  // namespace

void print_run(const RunRecord& run, std::ostream& out) {
  out << "run " << run.run_id << "  strategy " << run.strategy;
  if (run.strategy == "ega") out << " (T=" << textio::format_real(run.temperature) << ")";
  out << "  seed " << run.seed << "  epochs " << run.epoch_losses.size() << '\n';
  out << "trunk updates " << run.updates << ", skipped " << run.skipped_updates << '\n';
  if (!run.epoch_grad_norms.empty()) {
    const auto& g = run.epoch_grad_norms.front();
    out << "epoch-1 trunk gradient norms  waveform " << fixed(g[0], 5) << "  anchor " << fixed(g[1], 5)
        << "  length " << fixed(g[2], 5) << '\n';
  }
  out << std::left << std::setw(26) << "metric" << "test\n";
  for (const auto& [key, value] : run.test.values)
    out << std::left << std::setw(26) << metric_label(key) << fixed(value) << '\n';
}

void print_comparison(const Comparison& cmp, std::ostream& out) {
  if (cmp.strategies.empty()) return;
  out << "baseline " << cmp.baseline << ", " << cmp.strategies.front().runs.size() << " repeats, mean +/- 95% CI\n";
  out << std::left << std::setw(26) << "metric";
  for (const auto& s : cmp.strategies) out << std::setw(30) << s.strategy;
  out << '\n';
  for (const auto& [key, _] : cmp.strategies.front().metrics) {
    out << std::left << std::setw(26) << metric_label(key);
    for (const auto& s : cmp.strategies) {
      std::string cell = pm(s.metrics.at(key));
      if (auto it = s.p_values.find(key); it != s.p_values.end()) cell += " p=" + fixed(it->second, 3);
      out << std::setw(30) << cell;
    }
    out << '\n';
  }
  out << std::left << std::setw(26) << "delta_m_pct";
  for (const auto& s : cmp.strategies)
    out << std::setw(30) << (fixed(s.delta_m_of_means, 2) + " (" + pm(s.delta_m, 2) + ")");
  out << '\n' << std::left << std::setw(26) << "skipped_updates";
  for (const auto& s : cmp.strategies) out << std::setw(30) << s.skipped_updates;
  out << '\n';
}

void print_sweep(const SweepResult& sweep, std::ostream& out) {
  print_run(sweep.base, out);
  out << '\n'
      << std::left << std::setw(22) << "noise" << std::setw(9) << "dB" << std::setw(12) << "delta_m%"
      << std::setw(12) << "rmse" << std::setw(10) << "mdr" << std::setw(14) << "ppi_err_ms"
      << "detail\n";
  for (const auto& lv : sweep.levels) {
    out << std::left << std::setw(22) << lv.protocol.label() << std::setw(9) << textio::format_real(lv.protocol.snr_db)
        << std::setw(12) << fixed(lv.delta_m, 2) << std::setw(12) << fixed(lv.eval.values.at({0, "rmse"}))
        << std::setw(10) << fixed(lv.eval.values.at({1, "mdr"})) << std::setw(14)
        << fixed(lv.eval.values.at({2, "ppi_error_ms"}), 2);
    if (lv.realized_snr_db) out << "realized " << fixed(*lv.realized_snr_db, 3) << " dB";
    if (lv.protocol.type == NoiseType::Abrupt) out << lv.doped << "/" << lv.windows << " windows doped";
    out << '\n';
  }
  out << "training data unchanged: yes\n";
  out << "delta_m monotone over constant SNR: " << (sweep.monotone ? "yes" : "no") << '\n';
}

void write_epoch_losses(const RunRecord& run, std::ostream& out) {
  out << "epoch,task,train_loss,val_loss,grad_norm\n";
  for (std::size_t e = 0; e < run.epoch_losses.size(); ++e)
    for (std::size_t t = 0; t < net::kTaskCount; ++t)
      out << e + 1 << ',' << task_name(t) << ',' << textio::format_real(run.epoch_losses[e][t]) << ','
          << textio::format_real(run.epoch_val_losses[e][t]) << ','
          << textio::format_real(run.epoch_grad_norms[e][t]) << '\n';
}

void print_report(std::span<const metrics::ReportRow> rows, std::ostream& out) {
  using Key = std::tuple<std::string, double, std::string, double, std::string, std::string>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows)
    groups[{r.strategy, r.temperature, r.noise_type, r.noise_db, r.task, r.metric}].push_back(r.value);
  out << std::left << std::setw(14) << "strategy" << std::setw(6) << "T" << std::setw(22) << "noise" << std::setw(7)
      << "dB" << std::setw(26) << "metric" << std::setw(5) << "n" << "mean +/- 95% CI\n";
  for (const auto& [k, values] : groups) {
    const auto& [strategy, t, noise, db, task, metric] = k;
    out << std::left << std::setw(14) << strategy << std::setw(6) << textio::format_real(t) << std::setw(22) << noise
        << std::setw(7) << textio::format_real(db) << std::setw(26) << (task + "." + metric) << std::setw(5)
        << values.size() << pm(metrics::summarize(values)) << '\n';
  }
}

}  // namespace ega::harness
