#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ega::linalg {

/// Dense row-major matrix of doubles. Small by intent: holds task-gradient
/// matrices (n tasks x m parameters) and their n x n Gram products.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Throws InvalidInput when data.size() != rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Nested initializer, one inner list per row.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;
  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
double frobenius_norm(const Matrix& a);

/// Eigenpairs of a symmetric matrix. Eigenvalues descend; column j of
/// `vectors` pairs with values[j] and has its largest-magnitude entry
/// positive (first such entry on ties).
struct EigenDecomposition {
  std::vector<double> values;
  Matrix vectors;
};

/// G * G^T. Throws InvalidInput on an empty or non-finite G.
Matrix gram(const Matrix& g);

struct JacobiOptions {
  double symmetry_tol = 1e-9;
  double off_diagonal_rel_tol = 1e-12;
  int max_sweeps = 100;
};

/// Cyclic Jacobi rotations. Throws InvalidInput for non-square, non-finite or
/// non-symmetric input and NumericalFailure when the sweep budget runs out.
EigenDecomposition jacobi_eigh(const Matrix& a, const JacobiOptions& opts = {});

/// Threshold below which singular values of G are treated as zero.
class RankTolerance {
 public:
  static RankTolerance relative(double fraction_of_max) {
    return RankTolerance(fraction_of_max, true);
  }
  static RankTolerance absolute(double value) { return RankTolerance(value, false); }
  static RankTolerance standard() { return relative(1e-8); }

  double resolve(double sigma_max) const noexcept {
    return relative_ ? value_ * sigma_max : value_;
  }
  double value() const noexcept { return value_; }
  bool is_relative() const noexcept { return relative_; }

 private:
  RankTolerance(double v, bool rel) : value_(v), relative_(rel) {}
  double value_;
  bool relative_;
};

struct Alignment {
  /// sigma_min * U S^-1 U^T G, restricted to retained directions.
  Matrix aligned;
  /// Smallest retained singular value.
  double sigma_min = 0.0;
  std::size_t rank = 0;
  /// Singular values of G in descending order (all of them, retained or not).
  std::vector<double> singular_values;
};

/// Orthogonal Procrustes alignment of the rows of G followed by rescaling to
/// the smallest retained singular value. Rows of the result are mutually
/// orthogonal with norm sigma_min when G has full row rank.
///
/// Requires rows <= cols. Throws DegenerateGradient when no singular value
/// exceeds the tolerance.
Alignment project_align(const Matrix& g,
                        RankTolerance tol = RankTolerance::standard());

}  // namespace ega::linalg
