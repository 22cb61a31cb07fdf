#include "mcov/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "mcov/error.hpp"

namespace mcov {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kConvergenceRatio = 1e-12;
constexpr double kSignificant = 1e-12;
constexpr double kPsdSqrtTolerance = 1e-10;

void require_finite(double v, std::size_t i, std::size_t j) {
  if (!std::isfinite(v)) {
    throw DomainError(fmt::format("non-finite matrix entry at ({}, {})", i, j));
  }
}

std::size_t square_dim(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = rows.size();
  if (p == 0) throw DomainError("symmetric matrix needs at least one row");
  for (std::size_t i = 0; i < p; ++i) {
    if (rows[i].size() != p) {
      throw DomainError(fmt::format("row {} has {} entries, expected {}", i, rows[i].size(), p));
    }
  }
  return p;
}

double off_diagonal_norm(const std::vector<double>& a, std::size_t p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i != j) sum += a[i * p + j] * a[i * p + j];
    }
  }
  return std::sqrt(sum);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) {
    throw DomainError(fmt::format("shape mismatch: {}x{} * {}x{}", rows_, cols_, rhs.rows_, rhs.cols_));
  }
  Matrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += aik * rhs(k, j);
    }
  }
  return out;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {
  if (dim == 0) throw DomainError("symmetric matrix dimension must be at least 1");
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.a_[i * dim + i] = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> values) {
  SymMatrix m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m.set(i, i, values[i]);
  return m;
}

SymMatrix SymMatrix::from_rows_strict(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = square_dim(rows);
  SymMatrix m(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      if (rows[i][j] != rows[j][i]) {
        throw DomainError(fmt::format("matrix is not symmetric at ({}, {})", i, j));
      }
      m.set(i, j, rows[i][j]);
    }
  }
  return m;
}

SymMatrix SymMatrix::from_rows_symmetrized(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = square_dim(rows);
  SymMatrix m(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) m.set(i, j, 0.5 * (rows[i][j] + rows[j][i]));
  }
  return m;
}

SymMatrix SymMatrix::symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) throw DomainError("cannot symmetrize a non-square matrix");
  SymMatrix m(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i; j < a.cols(); ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
  }
  return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
  require_finite(value, i, j);
  a_[i * dim_ + j] = value;
  a_[j * dim_ + i] = value;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += a_[i * dim_ + i];
  return t;
}

Matrix SymMatrix::to_matrix() const {
  Matrix m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
  }
  return m;
}

SymMatrix SymMatrix::operator+(const SymMatrix& rhs) const {
  if (dim_ != rhs.dim_) throw DomainError("dimension mismatch in matrix sum");
  SymMatrix out(*this);
  for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] += rhs.a_[k];
  return out;
}

SymMatrix SymMatrix::operator-(const SymMatrix& rhs) const {
  if (dim_ != rhs.dim_) throw DomainError("dimension mismatch in matrix difference");
  SymMatrix out(*this);
  for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] -= rhs.a_[k];
  return out;
}

SymMatrix SymMatrix::operator*(double s) const {
  if (!std::isfinite(s)) throw DomainError("non-finite scale factor");
  SymMatrix out(*this);
  for (double& v : out.a_) v *= s;
  return out;
}

SpectralDecomposition eig_sym(const SymMatrix& input) {
  const std::size_t p = input.dim();
  std::vector<double> a(input.data().begin(), input.data().end());
  std::vector<double> v(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i) v[i * p + i] = 1.0;

  double frob = 0.0;
  for (double x : a) frob += x * x;
  const double threshold = kConvergenceRatio * std::sqrt(frob);

  for (int sweep = 0;; ++sweep) {
    const double off = off_diagonal_norm(a, p);
    if (off <= threshold) break;
    if (sweep == kMaxSweeps) {
      throw NumericFailure(
          fmt::format("Jacobi eigensolver did not converge in {} sweeps (off-diagonal norm {:.3e})",
                      kMaxSweeps, off),
          off);
    }
    for (std::size_t r = 0; r + 1 < p; ++r) {
      for (std::size_t q = r + 1; q < p; ++q) {
        const double arq = a[r * p + q];
        if (arq == 0.0) continue;
        const double theta = (a[q * p + q] - a[r * p + r]) / (2.0 * arq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (std::size_t k = 0; k < p; ++k) {
          const double akr = a[k * p + r];
          const double akq = a[k * p + q];
          a[k * p + r] = c * akr - s * akq;
          a[k * p + q] = s * akr + c * akq;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double ark = a[r * p + k];
          const double aqk = a[q * p + k];
          a[r * p + k] = c * ark - s * aqk;
          a[q * p + k] = s * ark + c * aqk;
        }
        a[r * p + q] = 0.0;
        a[q * p + r] = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          const double vkr = v[k * p + r];
          const double vkq = v[k * p + q];
          v[k * p + r] = c * vkr - s * vkq;
          v[k * p + q] = s * vkr + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * p + x] > a[y * p + y]; });

  SpectralDecomposition out{std::vector<double>(p), Matrix(p, p)};
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t src = order[j];
    out.eigenvalues[j] = a[src * p + src];
    double sign = 1.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double x = v[k * p + src];
      if (std::abs(x) > kSignificant) {
        sign = x > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < p; ++k) out.eigenvectors(k, j) = sign * v[k * p + src];
  }
  return out;
}

SymMatrix reconstruct(const Matrix& u, std::span<const double> values) {
  const std::size_t p = u.rows();
  if (values.size() != u.cols()) throw DomainError("eigenvalue count does not match basis");
  SymMatrix out(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] != 0.0) sum += values[k] * u(i, k) * u(j, k);
      }
      out.set(i, j, sum);
    }
  }
  return out;
}

double spectral_norm(std::span<const double> eigenvalues) {
  double m = 0.0;
  for (double x : eigenvalues) m = std::max(m, std::abs(x));
  return m;
}

double nuclear_norm(std::span<const double> eigenvalues) {
  double s = 0.0;
  for (double x : eigenvalues) s += std::abs(x);
  return s;
}

double norm(const SymMatrix& a, NormKind kind) {
  switch (kind) {
    case NormKind::kFrobenius: {
      double s = 0.0;
      for (double x : a.data()) s += x * x;
      return std::sqrt(s);
    }
    case NormKind::kSpectral:
      return spectral_norm(eig_sym(a).eigenvalues);
    case NormKind::kNuclear:
      return nuclear_norm(eig_sym(a).eigenvalues);
    case NormKind::kMaxAbsEntry: {
      double m = 0.0;
      for (double x : a.data()) m = std::max(m, std::abs(x));
      return m;
    }
    case NormKind::kTrace:
      return a.trace();
  }
  return 0.0;
}

double effective_rank(const SymMatrix& a) {
  const auto eig = eig_sym(a);
  const double spec = spectral_norm(eig.eigenvalues);
  if (spec == 0.0) throw DomainError("effective rank of the zero matrix is undefined");
  if (eig.eigenvalues.back() < -kPsdSqrtTolerance * std::max(1.0, spec)) {
    throw DomainError(fmt::format("effective rank needs a PSD matrix (smallest eigenvalue {:.6g})",
                                  eig.eigenvalues.back()));
  }
  return a.trace() / spec;
}

SymMatrix psd_sqrt(const SymMatrix& a) {
  auto eig = eig_sym(a);
  const double spec = spectral_norm(eig.eigenvalues);
  for (double& x : eig.eigenvalues) {
    if (x < -kPsdSqrtTolerance * spec) {
      throw DomainError(fmt::format("matrix is not PSD (eigenvalue {:.6g})", x));
    }
    x = x > 0.0 ? std::sqrt(x) : 0.0;
  }
  return reconstruct(eig.eigenvectors, eig.eigenvalues);
}

bool is_psd(const SymMatrix& a, double tol) {
  const auto eig = eig_sym(a);
  const double scale = std::max(1.0, spectral_norm(eig.eigenvalues));
  return eig.eigenvalues.back() >= -tol * scale;
}

std::size_t numerical_rank(std::span<const double> eigenvalues) {
  const double cutoff = kSignificant * spectral_norm(eigenvalues);
  return static_cast<std::size_t>(
      std::count_if(eigenvalues.begin(), eigenvalues.end(), [&](double x) { return x > cutoff; }));
}

}  // namespace mcov
