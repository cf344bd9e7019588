#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ega::metrics {

// Metrics that can be undefined for a given input (zero variance, empty
// reference) return std::nullopt; callers drop those values from
// aggregates.

/// sqrt(mean((a - b)^2)). Throws InvalidInput on empty or unequal lengths.
double rmse(std::span<const double> a, std::span<const double> b);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pcc(std::span<const double> a, std::span<const double> b);

/// 1 - SS_res / SS_tot; nullopt for constant truth.
std::optional<double> r_squared(std::span<const double> truth, std::span<const double> pred);

struct AnchorMatch {
  /// |truth - prediction| of each matched pair, in truth order.
  std::vector<double> errors;
  /// Unmatched truth anchors / all truth anchors.
  double mdr = 0.0;
};

inline constexpr double kAnchorTolerance = 0.150;

/// Greedy one-to-one matching: candidate pairs within `tol` seconds are taken
/// in order of increasing distance (ties by truth, then prediction index).
/// nullopt for an empty truth list.
std::optional<AnchorMatch> anchor_match(std::span<const double> truth, std::span<const double> pred,
                                        double tol = kAnchorTolerance);

/// Mean absolute difference of per-cycle PPIs, both given in milliseconds.
double ppi_error(std::span<const double> truth_ms, std::span<const double> pred_ms);

enum class Direction { LowerBetter, HigherBetter };

struct MetricSpec {
  std::size_t task;
  std::string name;
  Direction direction;
};

using MetricKey = std::pair<std::size_t, std::string>;  // (task, metric)
using MetricValues = std::map<MetricKey, double>;

struct DeltaM {
  double percent = 0.0;
  /// Metrics dropped because the baseline is zero or either value is not
  /// finite.
  std::vector<MetricKey> excluded;
};

/// Average signed relative change versus the baseline, first per task then
/// across tasks, in percent. Lower-better metrics count with sign -1 so that
/// a positive result always means improvement. Throws InvalidInput when a
/// metric named in `specs` is missing from either side.
DeltaM delta_m(const MetricValues& method, const MetricValues& baseline, std::span<const MetricSpec> specs);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

/// Welch unequal-variance t-test, two-sided p from Student's t with
/// Welch-Satterthwaite degrees of freedom. nullopt when a sample has fewer
/// than two values, or both variances vanish with different means.
std::optional<WelchResult> welch_t(std::span<const double> a, std::span<const double> b);

struct Summary {
  double mean = 0.0;
  /// 1.96 * sample std / sqrt(n); zero when n < 2.
  double ci95 = 0.0;
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

// ---------------------------------------------------------------------------
// Report rows: one per run x metric, comma-separated with a fixed header.

inline constexpr const char* kReportHeader = "run_id,seed,strategy,T,noise_type,noise_db,task,metric,value";

struct ReportRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string strategy;
  double temperature = 0.0;
  std::string noise_type = "none";
  double noise_db = 0.0;
  std::string task;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

void write_rows(std::span<const ReportRow> rows, std::ostream& out);
/// Throws InvalidInput on a bad header, wrong column count or unparsable field.
std::vector<ReportRow> read_rows(std::istream& in);
void write_rows(std::span<const ReportRow> rows, const std::filesystem::path& path);
std::vector<ReportRow> read_rows(const std::filesystem::path& path);

}  // namespace ega::metrics
