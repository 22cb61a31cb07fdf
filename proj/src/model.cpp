#include "mcov/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mcov/error.hpp"

namespace mcov {

MaskedData::MaskedData(Matrix y, std::vector<std::uint8_t> mask) : y_(std::move(y)), mask_(std::move(mask)) {
  if (y_.rows() == 0 || y_.cols() == 0) throw DomainError("masked data needs n >= 1 and p >= 1");
  if (mask_.size() != y_.rows() * y_.cols()) {
    throw DomainError(fmt::format("mask has {} entries, data has {}", mask_.size(), y_.rows() * y_.cols()));
  }
  for (std::size_t i = 0; i < y_.rows(); ++i) {
    for (std::size_t j = 0; j < y_.cols(); ++j) {
      if (mask_[i * y_.cols() + j] == 0) {
        y_(i, j) = 0.0;
      } else {
        mask_[i * y_.cols() + j] = 1;
      }
    }
  }
}

std::size_t MaskedData::observed_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

void require_valid_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw DomainError(fmt::format("observation probability delta must lie in (0, 1], got {}", delta));
  }
}

Matrix random_orthogonal(std::size_t p, RngSeed seed) {
  Rng rng(seed);
  Matrix q(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) q(i, j) = rng.normal();
  }
  // Modified Gram-Schmidt over columns. Normalizing each column keeps the
  // QR factor's diagonal positive, which is what makes the result Haar.
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < p; ++i) dot += q(i, k) * q(i, j);
      for (std::size_t i = 0; i < p; ++i) q(i, j) -= dot * q(i, k);
    }
    double len = 0.0;
    for (std::size_t i = 0; i < p; ++i) len += q(i, j) * q(i, j);
    len = std::sqrt(len);
    if (len == 0.0) throw NumericFailure("degenerate Gaussian draw in random_orthogonal", 0.0);
    for (std::size_t i = 0; i < p; ++i) q(i, j) /= len;
  }
  return q;
}

SymMatrix build_covariance(const CovarianceSpec& spec) {
  if (spec.p == 0) throw DomainError("covariance dimension must be at least 1");
  switch (spec.kind) {
    case CovarianceKind::kIdentity:
      return SymMatrix::identity(spec.p);
    case CovarianceKind::kDiagonal: {
      if (spec.values.size() != spec.p) {
        throw DomainError(fmt::format("diagonal covariance needs {} values, got {}", spec.p, spec.values.size()));
      }
      for (double v : spec.values) {
        if (!(v >= 0.0)) throw DomainError("diagonal covariance entries must be nonnegative");
      }
      return SymMatrix::diagonal(spec.values);
    }
    case CovarianceKind::kSpiked: {
      if (spec.values.size() > spec.p) {
        throw DomainError(fmt::format("{} spike eigenvalues exceed dimension {}", spec.values.size(), spec.p));
      }
      std::vector<double> eigenvalues(spec.p, spec.floor);
      std::copy(spec.values.begin(), spec.values.end(), eigenvalues.begin());
      for (double v : eigenvalues) {
        if (!(v >= 0.0)) throw DomainError("spiked covariance eigenvalues must be nonnegative");
      }
      if (!spec.rotation_seed) return SymMatrix::diagonal(eigenvalues);
      return reconstruct(random_orthogonal(spec.p, *spec.rotation_seed), eigenvalues);
    }
    case CovarianceKind::kExplicit: {
      if (!spec.matrix) throw DomainError("explicit covariance needs a matrix");
      if (spec.matrix->dim() != spec.p) {
        throw DomainError(fmt::format("explicit covariance has dimension {}, expected {}", spec.matrix->dim(), spec.p));
      }
      if (!is_psd(*spec.matrix, 1e-10)) throw DomainError("explicit covariance is not positive semidefinite");
      return *spec.matrix;
    }
  }
  throw DomainError("unknown covariance kind");
}

Matrix sample_gaussian(const SymMatrix& sigma, std::size_t n, RngSeed seed) {
  const SymMatrix root = psd_sqrt(sigma);
  const std::size_t p = sigma.dim();
  Rng rng(seed);
  Matrix x(n, p);
  std::vector<double> z(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : z) v = rng.normal();
    auto row = x.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < p; ++b) sum += root(a, b) * z[b];
      row[a] = sum;
    }
  }
  return x;
}

MaskedData apply_mask(const Matrix& x, double delta, RngSeed seed) {
  require_valid_delta(delta);
  Rng rng(seed);
  std::vector<std::uint8_t> mask(x.rows() * x.cols());
  for (auto& bit : mask) bit = rng.bernoulli(delta) ? 1 : 0;
  return MaskedData(x, std::move(mask));
}

double estimate_delta(const MaskedData& data) {
  return static_cast<double>(data.observed_count()) / static_cast<double>(data.n() * data.p());
}

}  // namespace mcov
