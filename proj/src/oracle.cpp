#include "mcov/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mcov/error.hpp"

namespace mcov {

namespace {

constexpr double kObjectiveSlack = 1e-12;

double frobenius_distance(const SymMatrix& x, const SymMatrix& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.data().size(); ++k) {
    const double d = x.data()[k] - y.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

void PgdSettings::validate() const {
  if (!(step_size > 0.0 && step_size < 0.5)) {
    throw DomainError(fmt::format("PGD step size must lie in (0, 0.5), got {}", step_size));
  }
  if (!(convergence_tol > 0.0)) throw DomainError("PGD convergence tolerance must be positive");
  if (max_iters == 0) throw DomainError("PGD needs at least one iteration");
}

SymMatrix project_psd(const SymMatrix& a) {
  auto eig = eig_sym(a);
  for (double& x : eig.eigenvalues) x = std::max(x, 0.0);
  return reconstruct(eig.eigenvectors, eig.eigenvalues);
}

double penalized_objective(const SymMatrix& a, const SymMatrix& s, double lambda) {
  const double d = frobenius_distance(a, s);
  return d * d + lambda * s.trace();
}

PgdSolution minimize_penalized(const SymMatrix& a, double lambda, const PgdSettings& settings) {
  settings.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError(fmt::format("lambda must be finite and >= 0, got {}", lambda));
  }
  const std::size_t p = a.dim();
  const double eta = settings.step_size;

  SymMatrix s = project_psd(a);
  double objective = penalized_objective(a, s, lambda);
  double change = 0.0;
  for (std::size_t it = 1; it <= settings.max_iters; ++it) {
    // S - eta (2 (S - A) + lambda I) = (1 - 2 eta) S + 2 eta A - eta lambda I
    SymMatrix step(p);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i; j < p; ++j) {
        double v = (1.0 - 2.0 * eta) * s(i, j) + 2.0 * eta * a(i, j);
        if (i == j) v -= eta * lambda;
        step.set(i, j, v);
      }
    }
    SymMatrix next = project_psd(step);
    const double next_objective = penalized_objective(a, next, lambda);
    if (next_objective > objective + kObjectiveSlack * std::max(1.0, std::abs(objective))) {
      throw NumericFailure(fmt::format("PGD objective increased at iteration {}: {:.17g} -> {:.17g}", it,
                                       objective, next_objective),
                           next_objective - objective);
    }
    change = frobenius_distance(next, s);
    s = std::move(next);
    objective = next_objective;
    if (change <= settings.convergence_tol) return {std::move(s), it, objective};
  }
  throw NumericFailure(
      fmt::format("PGD did not converge in {} iterations (last step {:.3e})", settings.max_iters, change), change);
}

OracleCurve oracle_rhs(const SpectralDecomposition& sigma_eig, double lambda,
                       const std::vector<std::size_t>& truncation_ranks) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  const auto& ev = sigma_eig.eigenvalues;
  const std::size_t p = ev.size();
  const double scale = spectral_norm(ev);
  if (ev.back() < -1e-10 * std::max(1.0, scale)) throw DomainError("oracle candidates need a PSD sigma");
  const double cutoff = 1e-12 * scale;

  auto truncation = [&](std::size_t k, std::string description) {
    double tail = 0.0;
    double nuclear = 0.0;
    std::size_t rank = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j < k) {
        nuclear += std::abs(ev[j]);
        if (ev[j] > cutoff) ++rank;
      } else {
        tail += ev[j] * ev[j];
      }
    }
    const double penalty =
        std::min(2.0 * lambda * nuclear, kRankBranchConstant * lambda * lambda * static_cast<double>(rank));
    return OracleCandidate{std::move(description), rank, tail + penalty};
  };

  OracleCurve curve;
  curve.candidates.push_back(truncation(0, "zero"));
  for (std::size_t k : truncation_ranks) {
    if (k > p) throw DomainError(fmt::format("truncation rank {} exceeds dimension {}", k, p));
    curve.candidates.push_back(truncation(k, fmt::format("top-{} truncation", k)));
  }
  curve.candidates.push_back(truncation(p, "sigma"));
  curve.infimum = curve.candidates.front().rhs;
  for (const auto& c : curve.candidates) curve.infimum = std::min(curve.infimum, c.rhs);
  return curve;
}

OracleCurve oracle_rhs(const SymMatrix& sigma, double lambda, const std::vector<std::size_t>& truncation_ranks) {
  return oracle_rhs(eig_sym(sigma), lambda, truncation_ranks);
}

OracleVerdict verify_oracle_inequality(const SymMatrix& sigma, const SymMatrix& sigma_hat,
                                       const SymMatrix& sigma_tilde, double lambda) {
  if (sigma.dim() != sigma_hat.dim() || sigma.dim() != sigma_tilde.dim()) {
    throw DomainError("oracle verification needs matrices of equal dimension");
  }
  OracleVerdict v;
  v.deviation = norm(sigma_tilde - sigma, NormKind::kSpectral);
  v.spectral_error = norm(sigma_hat - sigma, NormKind::kSpectral);
  const double frob = norm(sigma_hat - sigma, NormKind::kFrobenius);
  v.frobenius_sq_error = frob * frob;

  const auto sigma_eig = eig_sym(sigma);
  const double rank = static_cast<double>(numerical_rank(sigma_eig.eigenvalues));
  v.frobenius_bound = std::min(2.0 * lambda * nuclear_norm(sigma_eig.eigenvalues),
                               kRankBranchConstant * lambda * lambda * rank);

  v.event_holds = lambda >= 2.0 * v.deviation;
  if (v.event_holds) {
    const double sigma_scale = spectral_norm(sigma_eig.eigenvalues);
    const double sigma_frob_sq = norm(sigma, NormKind::kFrobenius) * norm(sigma, NormKind::kFrobenius);
    v.spectral_ok = v.spectral_error <= lambda + kInequalitySlack * std::max(lambda, sigma_scale);
    v.frobenius_ok =
        v.frobenius_sq_error <= v.frobenius_bound + kInequalitySlack * std::max(v.frobenius_bound, sigma_frob_sq);
  }
  return v;
}

}  // namespace mcov
