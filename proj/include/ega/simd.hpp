#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense vector kernels used by every arithmetic inner loop in the library
// (Gram products, projection, layer forward/backward). Each kernel has a
// portable scalar reference and vectorized variants; the active variant is
// chosen once per process from the host CPU and can be pinned with the
// EGA_SIMD environment variable ("scalar", "avx2", "neon").
//
// Variants may differ from the scalar reference by rounding only: the
// reductions use a fixed lane layout, so a given variant is bit-for-bit
// deterministic run to run.

namespace ega::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x *= a
  void (*scale)(double a, double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
};

/// Kernel tables compiled into this binary and runnable on this CPU.
/// The scalar table is always present and always first.
std::span<const KernelTable> available();

/// Table for `isa`, or nullptr when it is not available here.
const KernelTable* find(Isa isa) noexcept;

/// Process-wide active table.
const KernelTable& active() noexcept;

/// Overrides the active table (tests and benchmarks). Returns false and leaves
/// the selection unchanged when `isa` is unavailable.
bool select(Isa isa) noexcept;

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline void scale(double a, std::span<double> x) {
  active().scale(a, x.data(), x.size());
}

inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(EGA_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(EGA_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace ega::simd
