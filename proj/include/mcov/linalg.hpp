/**
 * @file linalg.hpp
 * @brief Dense symmetric matrices, Jacobi eigendecomposition and matrix norms.
 *
 * Everything here works on small dense matrices (p up to a few hundred).
 * Storage is full row-major; symmetry is enforced on every write.
 */

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mcov {

/// General dense row-major matrix. Used for data (n x p) and eigenvector bases.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;
  Matrix& operator*=(double s);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense p x p real symmetric matrix with finite entries.
class SymMatrix {
 public:
  /// Zero matrix of dimension p (p >= 1).
  explicit SymMatrix(std::size_t dim);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> values);

  /// Rejects any input with a[i][j] != a[j][i].
  static SymMatrix from_rows_strict(const std::vector<std::vector<double>>& rows);
  /// Replaces the input by (A + A^T) / 2.
  static SymMatrix from_rows_symmetrized(const std::vector<std::vector<double>>& rows);
  static SymMatrix symmetrized(const Matrix& a);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }
  /// Writes both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> data() const noexcept { return a_; }

  double trace() const;
  Matrix to_matrix() const;

  SymMatrix operator+(const SymMatrix& rhs) const;
  SymMatrix operator-(const SymMatrix& rhs) const;
  SymMatrix operator*(double s) const;

  bool operator==(const SymMatrix&) const = default;

 private:
  std::size_t dim_;
  std::vector<double> a_;
};

/// Eigenvalues in descending order; column j of `eigenvectors` belongs to eigenvalues[j].
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Cyclic Jacobi eigensolver.
///
/// Converges when the off-diagonal Frobenius norm falls to 1e-12 * ||A||_F;
/// throws NumericFailure after 100 sweeps. Each eigenvector is signed so that
/// its first component with magnitude above 1e-12 is positive.
SpectralDecomposition eig_sym(const SymMatrix& a);

/// U diag(values) U^T, restricted to the columns of U with nonzero weight.
SymMatrix reconstruct(const Matrix& eigenvectors, std::span<const double> values);

enum class NormKind { kFrobenius, kSpectral, kNuclear, kMaxAbsEntry, kTrace };

double norm(const SymMatrix& a, NormKind kind);
/// Spectral and nuclear norms from an existing decomposition.
double spectral_norm(std::span<const double> eigenvalues);
double nuclear_norm(std::span<const double> eigenvalues);

/// tr(A) / ||A||_inf for PSD, nonzero A. Throws DomainError otherwise.
double effective_rank(const SymMatrix& a);

/// Symmetric PSD square root; eigenvalues down to -1e-10 * ||A||_inf are clipped to zero.
SymMatrix psd_sqrt(const SymMatrix& a);

/// True iff the smallest eigenvalue is >= -tol * max(1, ||A||_inf).
bool is_psd(const SymMatrix& a, double tol);

/// Number of eigenvalues above 1e-12 * max |eigenvalue|.
std::size_t numerical_rank(std::span<const double> eigenvalues);

}  // namespace mcov
