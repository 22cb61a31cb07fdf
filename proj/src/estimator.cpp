#include "mcov/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mcov/error.hpp"

namespace mcov {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(fmt::format("{} must be a positive finite number, got {}", name, value));
  }
}

void require_samples(std::size_t n) {
  if (n == 0) throw DomainError("sample count n must be at least 1");
}

}  // namespace

void EstimatorConfig::validate() const {
  if (const auto* known = std::get_if<KnownDelta>(&delta_source)) require_valid_delta(known->value);
  if (const auto* fixed = std::get_if<FixedLambda>(&lambda_rule)) {
    if (!(fixed->value >= 0.0) || !std::isfinite(fixed->value)) {
      throw DomainError(fmt::format("fixed lambda must be finite and >= 0, got {}", fixed->value));
    }
  } else {
    require_positive(std::get<DataDrivenLambda>(lambda_rule).constant, "lambda constant C");
  }
  require_positive(c1, "c1");
  require_positive(bound_constant, "bound constant");
  require_positive(sample_size_constant, "sample-size constant");
}

SymMatrix masked_empirical_cov(const MaskedData& data) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  std::vector<double> acc(p * p, 0.0);
  std::vector<std::size_t> seen;
  seen.reserve(p);
  for (std::size_t i = 0; i < n; ++i) {
    seen.clear();
    const auto row = data.y().row(i);
    for (std::size_t j = 0; j < p; ++j) {
      if (data.observed(i, j)) seen.push_back(j);
    }
    for (std::size_t a = 0; a < seen.size(); ++a) {
      const double ya = row[seen[a]];
      for (std::size_t b = a; b < seen.size(); ++b) acc[seen[a] * p + seen[b]] += ya * row[seen[b]];
    }
  }
  SymMatrix out(p);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) out.set(a, b, acc[a * p + b] * inv_n);
  }
  return out;
}

SymMatrix population_bias_map(const SymMatrix& sigma, double delta) {
  require_valid_delta(delta);
  const double d2 = delta * delta;
  SymMatrix out(sigma.dim());
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    out.set(i, i, sigma(i, i) * delta);
    for (std::size_t j = i + 1; j < sigma.dim(); ++j) out.set(i, j, sigma(i, j) * d2);
  }
  return out;
}

SymMatrix debias(const SymMatrix& sigma_n_delta, double delta) {
  require_valid_delta(delta);
  // (1/delta - 1/delta^2) + 1/delta^2 collapses to 1/delta on the diagonal.
  const double d2 = delta * delta;
  SymMatrix out(sigma_n_delta.dim());
  for (std::size_t i = 0; i < sigma_n_delta.dim(); ++i) {
    out.set(i, i, sigma_n_delta(i, i) / delta);
    for (std::size_t j = i + 1; j < sigma_n_delta.dim(); ++j) out.set(i, j, sigma_n_delta(i, j) / d2);
  }
  return out;
}

ThresholdResult soft_threshold_psd(const SpectralDecomposition& eig, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError(fmt::format("lambda must be finite and >= 0, got {}", lambda));
  }
  const double half = 0.5 * lambda;
  std::vector<double> shrunk(eig.eigenvalues.size());
  std::vector<double> kept;
  for (std::size_t j = 0; j < shrunk.size(); ++j) {
    const double x = eig.eigenvalues[j] - half;
    shrunk[j] = x > 0.0 ? x : 0.0;
    if (shrunk[j] > 0.0) kept.push_back(shrunk[j]);
  }
  return {reconstruct(eig.eigenvectors, shrunk), std::move(kept)};
}

ThresholdResult soft_threshold_psd(const SymMatrix& a, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError(fmt::format("lambda must be finite and >= 0, got {}", lambda));
  }
  return soft_threshold_psd(eig_sym(a), lambda);
}

double data_driven_lambda(double trace, double spectral, std::size_t p, double delta, std::size_t n,
                          double constant) {
  require_valid_delta(delta);
  require_samples(n);
  require_positive(constant, "lambda constant C");
  if (trace < 0.0) {
    throw DomainError(fmt::format(
        "trace of the debiased covariance is negative ({:.6g}); the data-driven lambda is undefined, "
        "collect more samples or pass a fixed lambda",
        trace));
  }
  const double log2p = std::log(2.0 * static_cast<double>(p));
  return constant * std::sqrt(trace * spectral) / delta * std::sqrt(log2p / static_cast<double>(n));
}

double data_driven_lambda(const SymMatrix& sigma_tilde, double delta, std::size_t n, double constant) {
  const double trace = sigma_tilde.trace();
  if (trace < 0.0) return data_driven_lambda(trace, 0.0, sigma_tilde.dim(), delta, n, constant);
  return data_driven_lambda(trace, norm(sigma_tilde, NormKind::kSpectral), sigma_tilde.dim(), delta, n,
                            constant);
}

double oracle_lambda(const SymMatrix& sigma, double delta, std::size_t n, double constant, double c1) {
  require_valid_delta(delta);
  require_samples(n);
  require_positive(constant, "lambda constant C");
  require_positive(c1, "c1");
  const double r = effective_rank(sigma);
  const double spectral = norm(sigma, NormKind::kSpectral);
  const double log2p = std::log(2.0 * static_cast<double>(sigma.dim()));
  return constant * (spectral / c1) * std::sqrt(r * log2p / (delta * delta * static_cast<double>(n)));
}

bool sample_size_check(double effective_rank, std::size_t p, double delta, std::size_t n, double c) {
  require_valid_delta(delta);
  require_samples(n);
  require_positive(c, "sample-size constant");
  const double m = std::max(2.0 * static_cast<double>(p), static_cast<double>(n));
  const double lg = std::log(m);
  return static_cast<double>(n) >= c * effective_rank / (delta * delta) * lg * lg;
}

bool sample_size_check(const SymMatrix& sigma, double delta, std::size_t n, double c) {
  return sample_size_check(effective_rank(sigma), sigma.dim(), delta, n, c);
}

double deviation_bound(double spectral, double effective_rank, std::size_t p, double delta, std::size_t n,
                       double t, double constant, double c1) {
  require_valid_delta(delta);
  require_samples(n);
  require_positive(constant, "bound constant");
  require_positive(c1, "c1");
  if (!(t >= 0.0)) throw DomainError("confidence parameter t must be >= 0");
  const double nd = static_cast<double>(n);
  const double ratio = effective_rank * (t + std::log(2.0 * static_cast<double>(p))) / (delta * delta * nd);
  const double sqrt_branch = std::sqrt(ratio);
  const double linear_branch = ratio * (c1 * delta + t + std::log(nd));
  return constant * spectral / c1 * std::max(sqrt_branch, linear_branch);
}

double deviation_bound(const SymMatrix& sigma, double delta, std::size_t n, double t, double constant,
                       double c1) {
  return deviation_bound(norm(sigma, NormKind::kSpectral), effective_rank(sigma), sigma.dim(), delta, n, t,
                         constant, c1);
}

double trace_deviation_bound(double trace, double delta, std::size_t n, double t, double constant, double c1) {
  require_valid_delta(delta);
  require_samples(n);
  require_positive(constant, "bound constant");
  require_positive(c1, "c1");
  if (!(t >= 0.0)) throw DomainError("confidence parameter t must be >= 0");
  const double tn = t / static_cast<double>(n);
  return constant * trace / (c1 * delta) * std::max(std::sqrt(tn), tn);
}

double trace_deviation_bound(const SymMatrix& sigma, double delta, std::size_t n, double t, double constant,
                             double c1) {
  return trace_deviation_bound(sigma.trace(), delta, n, t, constant, c1);
}

EstimateReport estimate(const MaskedData& data, const EstimatorConfig& config) {
  config.validate();
  double delta;
  if (const auto* known = std::get_if<KnownDelta>(&config.delta_source)) {
    delta = known->value;
  } else {
    delta = estimate_delta(data);
    if (delta == 0.0) {
      throw DomainError(
          "estimated delta is 0: the mask has no observed entries, so the covariance cannot be "
          "estimated; supply data with at least one observed value");
    }
  }

  const std::size_t n = data.n();
  const std::size_t p = data.p();
  SymMatrix tilde = debias(masked_empirical_cov(data), delta);
  const auto eig = eig_sym(tilde);
  const double trace = tilde.trace();
  const double spectral = spectral_norm(eig.eigenvalues);

  double lambda;
  if (const auto* fixed = std::get_if<FixedLambda>(&config.lambda_rule)) {
    lambda = fixed->value;
  } else {
    lambda = data_driven_lambda(trace, spectral, p, delta, n, std::get<DataDrivenLambda>(config.lambda_rule).constant);
  }

  auto thresholded = soft_threshold_psd(eig, lambda);

  std::optional<double> eff_rank;
  if (trace > 0.0 && spectral > 0.0) eff_rank = trace / spectral;
  const bool size_ok =
      eff_rank && sample_size_check(*eff_rank, p, delta, n, config.sample_size_constant);

  const std::size_t rank = thresholded.kept_eigenvalues.size();
  return EstimateReport{std::move(thresholded.matrix),
                        std::move(tilde),
                        lambda,
                        delta,
                        rank,
                        eff_rank,
                        size_ok,
                        std::move(thresholded.kept_eigenvalues)};
}

}  // namespace mcov
