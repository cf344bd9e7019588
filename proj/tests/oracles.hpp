#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numerical code paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace ega::testing {

using Rows = std::vector<std::vector<double>>;

inline Rows random_rows(std::mt19937_64& rng, std::size_t n, std::size_t m, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Rows r(n, std::vector<double>(m));
  for (auto& row : r)
    for (double& v : row) v = nd(rng);
  return r;
}

inline double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

/// Classical Gram-Schmidt on Gaussian rows, giving a random matrix with
/// orthonormal rows.
inline Rows random_row_orthonormal(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  Rows q = random_rows(rng, n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double c = naive_dot(q[i], q[j]);
        for (std::size_t k = 0; k < m; ++k) q[i][k] -= c * q[j][k];
      }
    }
    const double nrm = std::sqrt(naive_dot(q[i], q[i]));
    for (double& v : q[i]) v /= nrm;
  }
  return q;
}

/// Eigenvalues of a symmetric 2x2 [[a, b], [b, d]] from the characteristic
/// polynomial, descending.
inline std::array<double, 2> eig2_closed_form(double a, double b, double d) {
  const double mean = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), b);
  return {mean + rad, mean - rad};
}

/// Roots of the characteristic cubic of a symmetric 3x3, by bisection on
/// the three monotone branches between the polynomial's critical points.
inline std::array<double, 3> eig3_bisection(const std::array<std::array<double, 3>, 3>& a) {
  const double tr = a[0][0] + a[1][1] + a[2][2];
  const double c1 = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] -
                    a[0][2] * a[2][0] + a[1][1] * a[2][2] - a[1][2] * a[2][1];
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  // p(l) = l^3 - tr l^2 + c1 l - det, increasing for large l.
  auto p = [&](double l) { return ((l - tr) * l + c1) * l - det; };
  double bound = 0.0;
  for (int i = 0; i < 3; ++i) {
    double r = std::abs(a[i][i]);
    for (int j = 0; j < 3; ++j)
      if (j != i) r += std::abs(a[i][j]);
    bound = std::max(bound, r);
  }
  bound += 1.0;
  const double disc = std::max(0.0, 4.0 * tr * tr - 12.0 * c1);
  const double crit_lo = (2.0 * tr - std::sqrt(disc)) / 6.0;
  const double crit_hi = (2.0 * tr + std::sqrt(disc)) / 6.0;
  auto bisect = [&](double lo, double hi) {
    const bool rising = p(hi) >= p(lo);
    for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if ((p(mid) < 0.0) == rising) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  return {bisect(crit_hi, bound), bisect(crit_lo, crit_hi), bisect(-bound, crit_lo)};
}

/// Composite Simpson rule on [lo, hi] with `panels` (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int panels) {
  if (panels % 2) ++panels;
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Two-sided p-value of Student's t with `dof` degrees of freedom by
/// integrating the density on [0, |t|] with Simpson's rule.
inline double student_t_two_sided_p(double t, double dof) {
  const double logc = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                      0.5 * std::log(dof * M_PI);
  auto pdf = [&](double x) {
    return std::exp(logc - 0.5 * (dof + 1.0) * std::log1p(x * x / dof));
  };
  const double half = simpson(pdf, 0.0, std::abs(t), 20000);
  return 1.0 - 2.0 * half;
}

}  // namespace ega::testing
