#include "ega/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "ega/error.hpp"
#include "ega/textio.hpp"

namespace ega::metrics {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": inputs must be non-empty and of equal length");
  }
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double rmse(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::optional<double> pcc(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "pcc");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> r_squared(std::span<const double> truth, std::span<const double> pred) {
  require_same_length(truth, pred, "r_squared");
  const double mt = mean(truth);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mt) * (truth[i] - mt);
  }
  if (!(ss_tot > 0.0)) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

std::optional<AnchorMatch> anchor_match(std::span<const double> truth, std::span<const double> pred, double tol) {
  if (truth.empty()) return std::nullopt;
  if (!(tol >= 0.0)) throw InvalidInput("anchor_match: tolerance must be >= 0");
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double d = std::abs(truth[i] - pred[j]);
      if (d <= tol) pairs.emplace_back(d, i, j);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<double> err(truth.size(), -1.0);
  std::vector<bool> pred_used(pred.size(), false);
  std::size_t matched = 0;
  for (const auto& [d, i, j] : pairs) {
    if (err[i] >= 0.0 || pred_used[j]) continue;
    err[i] = d;
    pred_used[j] = true;
    ++matched;
  }
  AnchorMatch out;
  for (double e : err)
    if (e >= 0.0) out.errors.push_back(e);
  out.mdr = static_cast<double>(truth.size() - matched) / static_cast<double>(truth.size());
  return out;
}

double ppi_error(std::span<const double> truth_ms, std::span<const double> pred_ms) {
  require_same_length(truth_ms, pred_ms, "ppi_error");
  double s = 0.0;
  for (std::size_t i = 0; i < truth_ms.size(); ++i) s += std::abs(truth_ms[i] - pred_ms[i]);
  return s / static_cast<double>(truth_ms.size());
}

DeltaM delta_m(const MetricValues& method, const MetricValues& baseline, std::span<const MetricSpec> specs) {
  if (specs.empty()) throw InvalidInput("delta_m: no metrics given");
  std::map<std::size_t, std::vector<double>> per_task;
  DeltaM out;
  for (const auto& spec : specs) {
    const MetricKey key{spec.task, spec.name};
    auto m = method.find(key);
    auto b = baseline.find(key);
    if (m == method.end() || b == baseline.end()) {
      throw InvalidInput("delta_m: missing metric '" + spec.name + "' for task " + std::to_string(spec.task));
    }
    if (b->second == 0.0 || !std::isfinite(b->second) || !std::isfinite(m->second)) {
      out.excluded.push_back(key);
      continue;
    }
    const double sign = spec.direction == Direction::LowerBetter ? -1.0 : 1.0;
    per_task[spec.task].push_back(sign * (m->second - b->second) / b->second);
  }
  if (per_task.empty()) return out;
  double total = 0.0;
  for (const auto& [task, rel] : per_task)
    total += std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(rel.size());
  out.percent = 100.0 * total / static_cast<double>(per_task.size());
  return out;
}

namespace {

double sample_variance(std::span<const double> x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

std::optional<WelchResult> welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  for (double v : a)
    if (!std::isfinite(v)) return std::nullopt;
  for (double v : b)
    if (!std::isfinite(v)) return std::nullopt;
  const double ma = mean(a), mb = mean(b);
  const double qa = sample_variance(a, ma) / static_cast<double>(a.size());
  const double qb = sample_variance(b, mb) / static_cast<double>(b.size());
  const double se2 = qa + qb;
  if (!(se2 > 0.0)) {
    if (ma == mb) return WelchResult{0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
    return std::nullopt;
  }
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 /
          (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
  if (r.t == 0.0) {
    r.p = 1.0;
  } else {
    boost::math::students_t dist(r.dof);
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  }
  return r;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = mean(values);
  if (values.size() >= 2) s.ci95 = 1.96 * std::sqrt(sample_variance(values, s.mean) / static_cast<double>(values.size()));
  return s;
}

namespace {

void check_field(const std::string& s, const char* name) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw InvalidInput(std::string("report: ") + name + " may not contain commas or newlines");
}

}  // namespace

void write_rows(std::span<const ReportRow> rows, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    check_field(r.run_id, "run_id");
    check_field(r.strategy, "strategy");
    check_field(r.noise_type, "noise_type");
    check_field(r.task, "task");
    check_field(r.metric, "metric");
    out << r.run_id << ',' << r.seed << ',' << r.strategy << ',' << textio::format_real(r.temperature) << ','
        << r.noise_type << ',' << textio::format_real(r.noise_db) << ',' << r.task << ',' << r.metric << ','
        << textio::format_real(r.value) << '\n';
  }
}

std::vector<ReportRow> read_rows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("report: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) throw InvalidInput("report: unexpected header '" + line + "'");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = textio::split(line, ',');
    if (f.size() != 9) throw InvalidInput("report line " + std::to_string(lineno) + ": expected 9 fields");
    ReportRow r;
    r.run_id = std::string(f[0]);
    r.seed = textio::parse_u64(f[1]);
    r.strategy = std::string(f[2]);
    r.temperature = textio::parse_real(f[3]);
    r.noise_type = std::string(f[4]);
    r.noise_db = textio::parse_real(f[5]);
    r.task = std::string(f[6]);
    r.metric = std::string(f[7]);
    r.value = textio::parse_real(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_rows(std::span<const ReportRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_rows(rows, out);
}

std::vector<ReportRow> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  return read_rows(in);
}

}  // namespace ega::metrics
