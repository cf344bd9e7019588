#include "ega/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ega/error.hpp"
#include "ega/simd.hpp"

namespace ega::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidInput("matrix data has " + std::to_string(data_.size()) +
                       " entries, expected " + std::to_string(rows * cols));
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) throw InvalidInput("ragged matrix rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidInput("multiply: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik != 0.0) simd::axpy(aik, b.row(k), dst);
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("subtract: shape mismatch");
  Matrix out = a;
  simd::axpy(-1.0, b.data(), out.data());
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  simd::scale(s, out.data());
  return out;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(simd::sum_squares(a.data())); }

Matrix gram(const Matrix& g) {
  if (g.rows() == 0 || g.cols() == 0) throw InvalidInput("gram: empty matrix");
  if (!g.all_finite()) throw InvalidInput("gram: non-finite entry");
  const std::size_t n = g.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = simd::dot(g.row(i), g.row(j));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

namespace {

double max_off_diagonal(const Matrix& a) {
  double off = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) off = std::max(off, std::abs(a(i, j)));
  return off;
}

// One Jacobi rotation zeroing a(p, q); V accumulates the rotations.
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);
  const std::size_t n = a.rows();

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double g = a(r, p);
    const double h = a(r, q);
    a(r, p) = a(p, r) = g - s * (h + g * tau);
    a(r, q) = a(q, r) = h + s * (g - h * tau);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const double g = v(r, p);
    const double h = v(r, q);
    v(r, p) = g - s * (h + g * tau);
    v(r, q) = h + s * (g - h * tau);
  }
}

}  // namespace

EigenDecomposition jacobi_eigh(const Matrix& input, const JacobiOptions& opts) {
  const std::size_t n = input.rows();
  if (n == 0 || input.cols() != n) throw InvalidInput("jacobi_eigh: matrix must be square and non-empty");
  if (!input.all_finite()) throw InvalidInput("jacobi_eigh: non-finite entry");
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      asym = std::max(asym, std::abs(input(i, j) - input(j, i)));
  if (asym > opts.symmetry_tol) {
    throw InvalidInput("jacobi_eigh: matrix not symmetric (max asymmetry " +
                       std::to_string(asym) + ")");
  }

  // Work on the symmetrized copy so rotations see a consistent matrix.
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = opts.off_diagonal_rel_tol * frobenius_norm(a);
  bool converged = false;
  for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
    if (max_off_diagonal(a) <= threshold) {
      converged = true;
      break;
    }
    if (sweep == opts.max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
  }
  if (!converged) {
    throw NumericalFailure("jacobi_eigh: no convergence after " +
                               std::to_string(opts.max_sweeps) + " sweeps",
                           max_off_diagonal(a));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.values[j] = a(src, src);
    std::size_t big = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, src)) > std::abs(v(big, src))) big = r;
    const double sign = v(big, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = sign * v(r, src);
  }
  return out;
}

Alignment project_align(const Matrix& g, RankTolerance tol) {
  const std::size_t n = g.rows();
  const std::size_t m = g.cols();
  if (n == 0 || m == 0) throw InvalidInput("project_align: empty gradient matrix");
  if (n > m) {
    throw InvalidInput("project_align: more tasks (" + std::to_string(n) +
                       ") than parameters (" + std::to_string(m) + ")");
  }

  const EigenDecomposition eig = jacobi_eigh(gram(g));

  Alignment out;
  out.singular_values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.singular_values[i] = std::sqrt(std::max(eig.values[i], 0.0));

  const double cutoff = tol.resolve(out.singular_values.front());
  std::size_t rank = 0;
  while (rank < n && out.singular_values[rank] > cutoff) ++rank;
  if (rank == 0) {
    throw DegenerateGradient("project_align: no singular value above " +
                             std::to_string(cutoff));
  }
  out.rank = rank;
  out.sigma_min = out.singular_values[rank - 1];

  // mixing = sigma_min * U_r S_r^-1 U_r^T, then aligned = mixing * G.
  Matrix mixing(n, n);
  for (std::size_t k = 0; k < rank; ++k) {
    const double w = out.sigma_min / out.singular_values[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double uik = eig.vectors(i, k) * w;
      for (std::size_t j = 0; j < n; ++j) mixing(i, j) += uik * eig.vectors(j, k);
    }
  }
  out.aligned = multiply(mixing, g);
  return out;
}

}  // namespace ega::linalg
