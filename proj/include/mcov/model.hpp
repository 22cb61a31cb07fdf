/**
 * @file model.hpp
 * @brief Ground-truth covariances, Gaussian sampling and the Bernoulli missingness mask.
 *
 * Observation model: every entry X_i^(j) is seen independently with probability
 * delta. Unobserved entries are stored as 0 and flagged in an explicit mask, so
 * genuine zeros in the data are never mistaken for missing values.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mcov/linalg.hpp"
#include "mcov/rng.hpp"

namespace mcov {

class MaskedData {
 public:
  /// `mask` is row-major n x p, nonzero = observed. Entries of `y` at
  /// unobserved positions are overwritten with 0.
  MaskedData(Matrix y, std::vector<std::uint8_t> mask);

  std::size_t n() const noexcept { return y_.rows(); }
  std::size_t p() const noexcept { return y_.cols(); }
  const Matrix& y() const noexcept { return y_; }
  bool observed(std::size_t i, std::size_t j) const { return mask_[i * p() + j] != 0; }
  std::size_t observed_count() const noexcept;

 private:
  Matrix y_;
  std::vector<std::uint8_t> mask_;
};

enum class CovarianceKind { kIdentity, kSpiked, kDiagonal, kExplicit };

/// Description of a ground-truth covariance.
///
/// kSpiked: leading eigenvalues `values`, the remaining p - values.size()
/// eigenvalues equal to `floor`. With no `rotation_seed` the result is the
/// diagonal matrix of those eigenvalues; otherwise it is conjugated by a
/// Haar-distributed orthogonal matrix drawn from that seed.
/// kDiagonal: `values` (length p) on the diagonal.
/// kExplicit: `matrix`, which must be PSD.
struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::kIdentity;
  std::size_t p = 1;
  std::vector<double> values;
  double floor = 0.0;
  std::optional<RngSeed> rotation_seed;
  std::optional<SymMatrix> matrix;
};

SymMatrix build_covariance(const CovarianceSpec& spec);

/// Haar-distributed p x p orthogonal matrix (Gram-Schmidt on a Gaussian matrix).
Matrix random_orthogonal(std::size_t p, RngSeed seed);

/// n rows drawn i.i.d. from N(0, sigma) as R z, with R = psd_sqrt(sigma).
Matrix sample_gaussian(const SymMatrix& sigma, std::size_t n, RngSeed seed);

/// Keeps each entry of `x` independently with probability delta in (0, 1].
MaskedData apply_mask(const Matrix& x, double delta, RngSeed seed);

/// Fraction of observed entries.
double estimate_delta(const MaskedData& data);

/// Throws DomainError unless 0 < delta <= 1.
void require_valid_delta(double delta);

}  // namespace mcov
