/**
 * @file estimator.hpp
 * @brief Debiased masked covariance and its nuclear-norm penalized estimator.
 *
 * Pipeline:
 *   Sigma_n^(delta) = (1/n) sum_i y_i y_i^T                      (zero-filled data)
 *   Sigma_tilde     = (1/delta - 1/delta^2) diag(Sigma_n^(delta))
 *                     + Sigma_n^(delta) / delta^2                 (unbiased for Sigma)
 *   Sigma_hat       = argmin_{S PSD} ||Sigma_tilde - S||_F^2 + lambda ||S||_1
 *                   = sum_j (sigma_j - lambda/2)_+ u_j u_j^T
 *
 * with the data-driven regularization
 *   lambda = C sqrt(tr(Sigma_tilde) ||Sigma_tilde||_inf) / delta * sqrt(log(2p) / n).
 *
 * All logarithms are natural.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "mcov/linalg.hpp"
#include "mcov/model.hpp"

namespace mcov {

struct KnownDelta {
  double value = 1.0;
};
struct DeltaFromMask {};
using DeltaSource = std::variant<KnownDelta, DeltaFromMask>;

struct FixedLambda {
  double value = 0.0;
};
struct DataDrivenLambda {
  double constant = 1.0;
};
using LambdaRule = std::variant<FixedLambda, DataDrivenLambda>;

struct EstimatorConfig {
  DeltaSource delta_source = DeltaFromMask{};
  LambdaRule lambda_rule = DataDrivenLambda{};
  double c1 = 1.0;                    // sub-gaussian moment constant; 1 for Gaussian data
  double bound_constant = 1.0;        // absolute constant of the deviation bounds
  double sample_size_constant = 1.0;  // c in n >= c r / delta^2 log^2(2p v n)

  /// Throws DomainError on an invalid field.
  void validate() const;
};

struct EstimateReport {
  SymMatrix sigma_hat;
  SymMatrix sigma_tilde;
  double lambda_used = 0.0;
  double delta_used = 1.0;
  std::size_t rank_hat = 0;
  /// Plug-in tr / ||.||_inf of sigma_tilde; empty when that is not positive.
  std::optional<double> effective_rank_tilde;
  bool sample_size_ok = false;
  /// Strictly positive thresholded eigenvalues, descending.
  std::vector<double> kept_eigenvalues;
};

struct ThresholdResult {
  SymMatrix matrix;
  std::vector<double> kept_eigenvalues;
};

SymMatrix masked_empirical_cov(const MaskedData& data);

/// E[Sigma_n^(delta)]: off-diagonal entries scaled by delta^2, diagonal by delta.
SymMatrix population_bias_map(const SymMatrix& sigma, double delta);

/// Exact inverse of population_bias_map.
SymMatrix debias(const SymMatrix& sigma_n_delta, double delta);

/// Eigenvalue soft-thresholding: eigenvalues become (sigma_j - lambda/2)_+.
/// Negative eigenvalues always map to zero, so the result is PSD for any
/// symmetric input.
ThresholdResult soft_threshold_psd(const SymMatrix& a, double lambda);
ThresholdResult soft_threshold_psd(const SpectralDecomposition& eig, double lambda);

double data_driven_lambda(const SymMatrix& sigma_tilde, double delta, std::size_t n, double constant);
/// Same rule from precomputed trace and spectral norm of sigma_tilde.
double data_driven_lambda(double trace, double spectral, std::size_t p, double delta, std::size_t n,
                          double constant);

/// Oracle choice C (||Sigma||_inf / c1) sqrt(r(Sigma) log(2p) / (delta^2 n)).
double oracle_lambda(const SymMatrix& sigma, double delta, std::size_t n, double constant, double c1);

/// n >= c (r / delta^2) log^2(max(2p, n)).
bool sample_size_check(double effective_rank, std::size_t p, double delta, std::size_t n, double c);
bool sample_size_check(const SymMatrix& sigma, double delta, std::size_t n, double c);

/// High-probability envelope for ||Sigma_tilde - Sigma||_inf (holds with
/// probability 1 - e^{-t}, up to the unknown absolute constant).
double deviation_bound(double spectral, double effective_rank, std::size_t p, double delta, std::size_t n,
                       double t, double constant, double c1);
double deviation_bound(const SymMatrix& sigma, double delta, std::size_t n, double t, double constant,
                       double c1);

/// Envelope for |tr(Sigma_tilde) - tr(Sigma)|.
double trace_deviation_bound(double trace, double delta, std::size_t n, double t, double constant, double c1);
double trace_deviation_bound(const SymMatrix& sigma, double delta, std::size_t n, double t, double constant,
                             double c1);

/// Full pipeline: resolve delta, masked covariance, debias, resolve lambda, threshold.
EstimateReport estimate(const MaskedData& data, const EstimatorConfig& config);

}  // namespace mcov
