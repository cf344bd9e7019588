#include "ega/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ega/error.hpp"
#include "ega/simd.hpp"
#include "ega/textio.hpp"

namespace ega::synth {

namespace {

// Gaussian tails beyond this many widths are below 1e-27 and skipped.
constexpr double kSupportWidths = 8.0;

void check_range(const Range& r, const char* name, bool positive) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !r.valid()) {
    throw InvalidConfig(std::string("synth: invalid range for ") + name);
  }
  if (positive && r.lo <= 0.0) throw InvalidConfig(std::string("synth: ") + name + " must be positive");
}

double draw(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Sample index range [first, last] covered by centre +- half_width seconds.
std::pair<long long, long long> support(double centre, double half_width, double fs, std::size_t n) {
  const long long first = std::max<long long>(0, static_cast<long long>(std::ceil((centre - half_width) * fs)));
  const long long last = std::min<long long>(static_cast<long long>(n) - 1,
                                             static_cast<long long>(std::floor((centre + half_width) * fs)));
  return {first, last};
}

}  // namespace

std::vector<EcgWave> default_ecg_template() {
  return {
      {0.15, -0.20, 0.025},   // P
      {-0.12, -0.035, 0.010}, // Q
      {1.00, 0.0, 0.012},     // R
      {-0.20, 0.040, 0.012},  // S
      {0.30, 0.30, 0.050},    // T
  };
}

void SynthConfig::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw InvalidConfig("synth: fs must be positive");
  if (!(duration_s > 0.0)) throw InvalidConfig("synth: duration must be positive");
  check_range(ppi, "ppi", true);
  check_range(f1, "f1", true);
  check_range(f2, "f2", true);
  check_range(b1, "b1", true);
  check_range(b2, "b2", true);
  check_range(a1, "a1", false);
  check_range(a2, "a2", false);
  check_range(t2_fraction, "t2_fraction", true);
  check_range(first_anchor, "first_anchor", false);
  if (first_anchor.lo < 0.0) throw InvalidConfig("synth: first anchor must be >= 0");
  if (t2_fraction.hi >= 1.0) throw InvalidConfig("synth: T2 must fall before the next cycle");
  if (!(max_ppi_step >= 0.0 && max_ppi_step < 1.0)) throw InvalidConfig("synth: max_ppi_step must be in [0, 1)");
  for (const auto& w : ecg)
    if (!(w.width_s > 0.0)) throw InvalidConfig("synth: ECG wave width must be positive");
}

std::string SynthConfig::canonical() const {
  std::ostringstream os;
  auto r = [&](const char* k, const Range& v) {
    os << k << '=' << textio::format_real(v.lo) << ',' << textio::format_real(v.hi) << '\n';
  };
  os << "fs=" << textio::format_real(fs) << '\n';
  os << "duration_s=" << textio::format_real(duration_s) << '\n';
  r("ppi", ppi);
  os << "max_ppi_step=" << textio::format_real(max_ppi_step) << '\n';
  r("f1", f1);
  r("f2", f2);
  r("b1", b1);
  r("b2", b2);
  r("a1", a1);
  r("a2", a2);
  r("t2_fraction", t2_fraction);
  r("first_anchor", first_anchor);
  for (const auto& w : ecg) {
    os << "ecg=" << textio::format_real(w.amplitude) << ',' << textio::format_real(w.offset_ppi) << ','
       << textio::format_real(w.width_s) << '\n';
  }
  return os.str();
}

std::uint64_t SynthConfig::hash() const { return textio::fnv1a(canonical()); }

std::vector<CycleParams> gen_cycles(std::uint64_t seed, std::size_t count, const SynthConfig& config) {
  config.validate();
  if (count == 0) throw InvalidConfig("gen_cycles: need at least one cycle");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  std::vector<CycleParams> out;
  out.reserve(count);
  double t1 = draw(rng, config.first_anchor);
  double ppi = draw(rng, config.ppi);
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) {
      t1 += out.back().ppi;
      ppi = std::clamp(ppi * (1.0 + config.max_ppi_step * step(rng)), config.ppi.lo, config.ppi.hi);
    }
    CycleParams c{};
    c.a1 = draw(rng, config.a1);
    c.a2 = draw(rng, config.a2);
    c.b1 = draw(rng, config.b1);
    c.b2 = draw(rng, config.b2);
    c.f1 = draw(rng, config.f1);
    c.f2 = draw(rng, config.f2);
    c.t1 = t1;
    c.ppi = ppi;
    c.t2 = t1 + draw(rng, config.t2_fraction) * ppi;
    out.push_back(c);
  }
  return out;
}

RadarTrace render_radar(std::span<const CycleParams> cycles, double fs, std::size_t sample_count) {
  if (!(fs > 0.0)) throw InvalidConfig("render_radar: fs must be positive");
  for (const auto& c : cycles) {
    if (fs <= 2.0 * std::max(c.f1, c.f2)) {
      throw InvalidConfig("render_radar: fs " + textio::format_real(fs) + " Hz undersamples a " +
                          textio::format_real(std::max(c.f1, c.f2)) + " Hz vibration");
    }
    if (!(c.b1 > 0.0) || !(c.b2 > 0.0)) throw InvalidConfig("render_radar: envelope widths must be positive");
  }
  RadarTrace out{std::vector<double>(sample_count, 0.0), {}};
  const double span_s = static_cast<double>(sample_count) / fs;
  std::vector<double> contrib;
  for (const auto& c : cycles) {
    if (c.t1 >= 0.0 && c.t1 < span_s) out.anchors.push_back(c.t1);
    const auto [f1, l1] = support(c.t1, kSupportWidths * c.b1, fs, sample_count);
    const auto [f2, l2] = support(c.t2, kSupportWidths * c.b2, fs, sample_count);
    const long long first = std::min(f1, f2);
    const long long last = std::max(l1, l2);
    if (first > last) continue;
    // The cycle's full contribution is formed first, then added once, so
    // traces of disjoint cycle lists sum exactly.
    contrib.assign(static_cast<std::size_t>(last - first + 1), 0.0);
    for (long long i = f1; i <= l1; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double u = (t - c.t1) / c.b1;
      contrib[i - first] += c.a1 * std::cos(2.0 * std::numbers::pi * c.f1 * t) * std::exp(-u * u);
    }
    for (long long i = f2; i <= l2; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double u = (t - c.t2) / c.b2;
      contrib[i - first] += c.a2 * std::cos(2.0 * std::numbers::pi * c.f2 * t) * std::exp(-u * u);
    }
    for (std::size_t j = 0; j < contrib.size(); ++j) out.samples[first + j] += contrib[j];
  }
  return out;
}

std::vector<double> render_ecg(std::span<const CycleParams> cycles, double fs, std::size_t sample_count,
                               std::span<const EcgWave> waves) {
  if (!(fs > 0.0)) throw InvalidConfig("render_ecg: fs must be positive");
  std::vector<double> out(sample_count, 0.0);
  std::vector<double> contrib;
  for (const auto& c : cycles) {
    long long first = static_cast<long long>(sample_count), last = -1;
    for (const auto& w : waves) {
      const auto [f, l] = support(c.t1 + w.offset_ppi * c.ppi, kSupportWidths * w.width_s, fs, sample_count);
      first = std::min(first, f);
      last = std::max(last, l);
    }
    if (first > last) continue;
    contrib.assign(static_cast<std::size_t>(last - first + 1), 0.0);
    for (const auto& w : waves) {
      const double centre = c.t1 + w.offset_ppi * c.ppi;
      const auto [f, l] = support(centre, kSupportWidths * w.width_s, fs, sample_count);
      for (long long i = f; i <= l; ++i) {
        const double u = (static_cast<double>(i) / fs - centre) / w.width_s;
        contrib[i - first] += w.amplitude * std::exp(-0.5 * u * u);
      }
    }
    for (std::size_t j = 0; j < contrib.size(); ++j) out[first + j] += contrib[j];
  }
  return out;
}

SyntheticRecord make_record(std::uint64_t seed, const SynthConfig& config) {
  config.validate();
  const auto samples = static_cast<std::size_t>(std::llround(config.duration_s * config.fs));
  const auto count = static_cast<std::size_t>(
      std::ceil((config.duration_s - config.first_anchor.lo) / config.ppi.lo)) + 2;
  auto cycles = gen_cycles(seed, count, config);
  const double span_s = static_cast<double>(samples) / config.fs;
  std::erase_if(cycles, [&](const CycleParams& c) { return c.t1 >= span_s; });

  SyntheticRecord rec;
  rec.fs = config.fs;
  rec.seed = seed;
  rec.config_hash = config.hash();
  auto radar = render_radar(cycles, config.fs, samples);
  rec.radar = std::move(radar.samples);
  rec.anchors = std::move(radar.anchors);
  rec.ecg = render_ecg(cycles, config.fs, samples, config.ecg);
  for (const auto& c : cycles) rec.ppi.push_back(c.ppi);
  rec.cycles = std::move(cycles);
  return rec;
}

namespace {

double mean_power(std::span<const double> x) {
  return x.empty() ? 0.0 : simd::sum_squares(x) / static_cast<double>(x.size());
}

// Gaussian draw rescaled so its realized power is exactly `power`.
std::vector<double> scaled_noise(std::mt19937_64& rng, std::size_t n, double power) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> noise(n);
  for (double& v : noise) v = nd(rng);
  const double realized = mean_power(noise);
  if (realized > 0.0) simd::scale(std::sqrt(power / realized), noise);
  return noise;
}

}  // namespace

std::vector<double> add_constant_noise(std::span<const double> trace, double snr_db, std::uint64_t seed) {
  if (trace.empty()) throw InvalidInput("add_constant_noise: empty trace");
  if (!std::isfinite(snr_db)) throw InvalidConfig("add_constant_noise: SNR must be finite");
  const double ps = mean_power(trace);
  if (!(ps > 0.0)) throw InvalidInput("add_constant_noise: trace has zero power");
  std::mt19937_64 rng(seed);
  auto noise = scaled_noise(rng, trace.size(), ps / std::pow(10.0, snr_db / 10.0));
  std::vector<double> out(trace.begin(), trace.end());
  simd::axpy(1.0, noise, out);
  return out;
}

double measured_snr_db(std::span<const double> clean, std::span<const double> noisy) {
  if (clean.size() != noisy.size() || clean.empty()) throw InvalidInput("measured_snr_db: length mismatch");
  double pn = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = noisy[i] - clean[i];
    pn += d * d;
  }
  pn /= static_cast<double>(clean.size());
  return 10.0 * std::log10(mean_power(clean) / pn);
}

std::vector<Burst> add_abrupt_noise(std::span<std::vector<double>> windows, double fs, double fraction,
                                    double duration_s, double snr_db, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidConfig("add_abrupt_noise: fraction must be in (0, 1]");
  if (!(duration_s > 0.0)) throw InvalidConfig("add_abrupt_noise: duration must be positive");
  if (!std::isfinite(snr_db)) throw InvalidConfig("add_abrupt_noise: SNR must be finite");
  const std::size_t n = windows.size();
  const auto doped = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  const auto burst_len = static_cast<std::size_t>(std::llround(duration_s * fs));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Partial Fisher-Yates: the first `doped` entries are a uniform subset.
  for (std::size_t i = 0; i < doped; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(doped));
  std::sort(chosen.begin(), chosen.end());

  std::vector<Burst> bursts;
  for (std::size_t idx : chosen) {
    auto& w = windows[idx];
    if (burst_len > w.size()) {
      throw InvalidConfig("add_abrupt_noise: burst longer than the window");
    }
    const double ps = mean_power(w);
    if (!(ps > 0.0)) throw InvalidInput("add_abrupt_noise: window has zero power");
    std::uniform_int_distribution<std::size_t> place(0, w.size() - burst_len);
    const std::size_t begin = place(rng);
    auto noise = scaled_noise(rng, burst_len, ps / std::pow(10.0, snr_db / 10.0));
    simd::axpy(1.0, noise, std::span<double>(w).subspan(begin, burst_len));
    bursts.push_back({idx, begin, begin + burst_len});
  }
  return bursts;
}

std::size_t LengthBins::count() const noexcept {
  return static_cast<std::size_t>(std::llround((hi_s - lo_s) / width_s));
}

std::size_t LengthBins::bin(double ppi_s) const noexcept {
  const double k = std::floor((ppi_s - lo_s) / width_s + 1e-9);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), count() - 1);
}

double LengthBins::center(std::size_t b) const noexcept {
  return lo_s + (static_cast<double>(b) + 0.5) * width_s;
}

namespace {

double interpolate(std::span<const double> trace, double fs, double t) {
  const double pos = t * fs;
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= trace.size()) return trace.back();
  const double frac = pos - static_cast<double>(i);
  return trace[i] + frac * (trace[i + 1] - trace[i]);
}

}  // namespace

std::vector<Segment> segment(const SyntheticRecord& record, const SegmentOptions& opt) {
  const double fs = record.fs;
  const auto win = static_cast<std::size_t>(std::llround(opt.window_s * fs));
  const auto step = static_cast<std::size_t>(std::llround(opt.step_s * fs));
  if (win == 0 || step == 0) throw InvalidConfig("segment: window and step must be positive");
  if (opt.target_length < 2 || opt.anchor_classes == 0) throw InvalidConfig("segment: bad label sizes");
  if (record.radar.size() < win) throw InvalidInput("segment: record shorter than one window");

  const std::size_t count = (record.radar.size() - win) / step + 1;
  const double class_width = opt.window_s / static_cast<double>(opt.anchor_classes);
  const double span_s = record.duration_s();
  std::vector<Segment> out(count);
  for (std::size_t s = 0; s < count; ++s) {
    Segment& seg = out[s];
    seg.start = s * step;
    seg.window.assign(record.radar.begin() + static_cast<std::ptrdiff_t>(seg.start),
                      record.radar.begin() + static_cast<std::ptrdiff_t>(seg.start + win));
    const double t0 = static_cast<double>(seg.start) / fs;
    const double centre = t0 + 0.5 * opt.window_s;

    bool any_inside = false;
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (std::size_t k = 0; k < record.anchors.size(); ++k) {
      const double a = record.anchors[k];
      const double rel = a - t0;
      if (rel >= 0.0 && rel < opt.window_s) {
        any_inside = true;
        seg.anchor_times.push_back(rel);
        seg.anchor_classes.push_back(
            std::min(opt.anchor_classes - 1, static_cast<std::size_t>(std::floor(rel / class_width))));
      }
      const double d = std::abs(a - centre);
      if (d < best_dist) {  // strict: ties keep the earlier anchor
        best_dist = d;
        best = k;
      }
    }
    if (!any_inside) continue;
    const double t1 = record.anchors[best];
    const double ppi = record.ppi[best];
    const double begin = t1 - ppi / 3.0;
    const double end = t1 + 2.0 * ppi / 3.0;
    if (begin < 0.0 || end > span_s) continue;

    seg.labeled = true;
    seg.cycle = best;
    seg.ppi = ppi;
    seg.ppi_class = opt.length_bins.bin(ppi);
    seg.ecg_target.resize(opt.target_length);
    const double dt = ppi / static_cast<double>(opt.target_length);
    for (std::size_t j = 0; j < opt.target_length; ++j)
      seg.ecg_target[j] = interpolate(record.ecg, fs, begin + static_cast<double>(j) * dt);
  }
  return out;
}

std::vector<double> pooled_rms(std::span<const double> window, std::size_t pool) {
  if (pool == 0 || window.size() % pool != 0) throw InvalidInput("pooled_rms: window not a multiple of pool");
  std::vector<double> out(window.size() / pool);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::sqrt(simd::sum_squares(window.subspan(i * pool, pool)) / static_cast<double>(pool));
  return out;
}

}  // namespace ega::synth
