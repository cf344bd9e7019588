#include "ega/simd.hpp"

namespace ega::simd {
namespace {

// Four independent accumulators combined as (s0 + s1) + (s2 + s3). The same
// pairing is used by the vector variants so results agree closely.
double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  return dot_scalar(x, x, n);
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar,
                               scale_scalar, sum_squares_scalar};
}  // namespace detail

}  // namespace ega::simd
