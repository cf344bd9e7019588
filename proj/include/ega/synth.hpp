#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// Synthetic paired radar-vibration / ECG-template records. Each cardiac
// cycle contributes two Gaussian-windowed cosines to the radar trace,
//   v(t) = a cos(2 pi f t) exp(-(t - T)^2 / b^2),
// at the first (T1) and second (T2) vibration times; the ECG template's R
// peak sits on T1, and consecutive T1 differ by the cycle's PPI.

namespace ega::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const noexcept { return lo <= hi; }
};

/// One Gaussian wave of the ECG template. Centre is offset_ppi * PPI from the
/// R time; the shape is amplitude * exp(-(t - c)^2 / (2 width_s^2)).
struct EcgWave {
  double amplitude;
  double offset_ppi;
  double width_s;
};

/// Five-wave P, Q, R, S, T stand-in. Not physiological.
std::vector<EcgWave> default_ecg_template();

struct SynthConfig {
  double fs = 200.0;
  double duration_s = 30.0;
  Range ppi{0.6, 1.0};
  /// Largest relative change of PPI between consecutive cycles.
  double max_ppi_step = 0.05;
  Range f1{18.0, 25.0};
  Range f2{30.0, 40.0};
  Range b1{0.04, 0.07};
  Range b2{0.02, 0.05};
  Range a1{1.0, 1.0};
  Range a2{0.3, 0.6};
  /// (T2 - T1) / PPI
  Range t2_fraction{0.28, 0.38};
  /// Time of the first R anchor.
  Range first_anchor{0.1, 0.6};
  std::vector<EcgWave> ecg = default_ecg_template();

  /// Throws InvalidConfig on empty/invalid ranges or non-positive values.
  void validate() const;
  /// Stable key=value rendering; its FNV-1a hash identifies the config.
  std::string canonical() const;
  std::uint64_t hash() const;
};

struct CycleParams {
  double a1, a2;
  double b1, b2;
  double f1, f2;
  double t1, t2;
  double ppi;
};

/// K cycles with smoothly varying PPI. Deterministic in (seed, config).
std::vector<CycleParams> gen_cycles(std::uint64_t seed, std::size_t count, const SynthConfig& config);

struct RadarTrace {
  std::vector<double> samples;
  std::vector<double> anchors;
};

/// Samples t_i = i / fs for i < sample_count. Throws InvalidConfig when
/// fs <= 2 max(f1, f2). Anchors are the T1 of cycles inside the span.
RadarTrace render_radar(std::span<const CycleParams> cycles, double fs, std::size_t sample_count);

std::vector<double> render_ecg(std::span<const CycleParams> cycles, double fs,
                               std::size_t sample_count, std::span<const EcgWave> waves);

struct Burst {
  std::size_t segment = 0;  // index of the doped window
  std::size_t begin = 0;    // first noisy sample (absolute in the trace or window)
  std::size_t end = 0;      // one past the last
  friend bool operator==(const Burst&, const Burst&) = default;
};

struct NoiseAnnotation {
  std::string type = "none";  // none | constant | abrupt
  double snr_db = 0.0;
  std::vector<Burst> bursts;
  friend bool operator==(const NoiseAnnotation&, const NoiseAnnotation&) = default;
};

struct SyntheticRecord {
  double fs = 200.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<CycleParams> cycles;
  std::vector<double> radar;
  std::vector<double> ecg;
  std::vector<double> anchors;
  /// PPI of the cycle starting at each anchor.
  std::vector<double> ppi;
  NoiseAnnotation noise;

  double duration_s() const noexcept { return static_cast<double>(radar.size()) / fs; }
};

SyntheticRecord make_record(std::uint64_t seed, const SynthConfig& config);

/// Additive white Gaussian noise scaled on the realized draw so that
/// 10 log10(P_signal / P_noise) equals snr_db. Throws InvalidInput on an
/// empty or zero-power trace.
std::vector<double> add_constant_noise(std::span<const double> trace, double snr_db, std::uint64_t seed);

/// 10 log10(P(clean) / P(noisy - clean)).
double measured_snr_db(std::span<const double> clean, std::span<const double> noisy);

/// Dopes round(fraction * windows.size()) randomly chosen windows, each with
/// one contiguous burst of round(duration_s * fs) samples placed uniformly,
/// whose power is P(window) / 10^(snr_db / 10). Burst begin/end are window
/// relative and sorted by window index.
std::vector<Burst> add_abrupt_noise(std::span<std::vector<double>> windows, double fs, double fraction,
                                    double duration_s, double snr_db, std::uint64_t seed);

struct LengthBins {
  double lo_s = 0.4;
  double hi_s = 1.4;
  double width_s = 0.01;
  std::size_t count() const noexcept;
  std::size_t bin(double ppi_s) const noexcept;
  double center(std::size_t bin) const noexcept;
};

struct SegmentOptions {
  double window_s = 4.0;
  double step_s = 1.0;
  std::size_t target_length = 200;
  std::size_t anchor_classes = 200;
  LengthBins length_bins{};
};

struct Segment {
  std::size_t start = 0;  // first sample in the record
  std::vector<double> window;
  bool labeled = false;
  std::size_t cycle = 0;  // index into record.anchors of the centre cycle
  std::vector<double> ecg_target;
  std::vector<double> anchor_times;  // seconds from window start
  std::vector<std::size_t> anchor_classes;
  double ppi = 0.0;
  std::size_t ppi_class = 0;
};

/// Sliding windows. The centre cycle is the anchor nearest the window
/// centre (earlier one on ties); its ECG piece spans [T1 - PPI/3, T1 + 2 PPI/3)
/// resampled to target_length points. Windows with no anchor inside, or
/// whose centre piece leaves the record, come back unlabeled.
std::vector<Segment> segment(const SyntheticRecord& record, const SegmentOptions& options = {});

/// RMS over consecutive blocks of `pool` samples.
std::vector<double> pooled_rms(std::span<const double> window, std::size_t pool);

// Record files: text header plus columnar blocks, reals in shortest
// round-trip form so export/import is lossless.
void write_record(const SyntheticRecord& record, std::ostream& out);
SyntheticRecord read_record(std::istream& in);
void write_record(const SyntheticRecord& record, const std::filesystem::path& path);
SyntheticRecord read_record(const std::filesystem::path& path);

}  // namespace ega::synth
