/**
 * @file oracle.hpp
 * @brief Independent checks for the penalized estimator.
 *
 * minimize_penalized solves min_{S PSD} ||A - S||_F^2 + lambda ||S||_1 by
 * projected gradient descent; it never uses the closed-form thresholding rule
 * and so certifies it. The remaining functions evaluate both sides of the
 * oracle inequalities that hold on the event lambda >= 2 ||Sigma_tilde - Sigma||_inf.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mcov/linalg.hpp"

namespace mcov {

/// (1 + sqrt(2))^2 / 8, the constant of the rank branch.
inline constexpr double kRankBranchConstant = 0.72855339059327376220;

struct PgdSettings {
  double step_size = 0.25;  // descent is guaranteed for step < 1/2 (gradient is 2-Lipschitz)
  std::size_t max_iters = 50'000;
  double convergence_tol = 1e-10;

  void validate() const;
};

struct PgdSolution {
  SymMatrix minimizer;
  std::size_t iterations = 0;
  double objective = 0.0;
};

/// Euclidean projection onto the PSD cone (negative eigenvalues clipped).
SymMatrix project_psd(const SymMatrix& a);

/// ||A - S||_F^2 + lambda tr(S) for PSD S.
double penalized_objective(const SymMatrix& a, const SymMatrix& s, double lambda);

/// Iterates S <- Proj_PSD(S - eta (2 (S - A) + lambda I)) from Proj_PSD(A).
/// Throws NumericFailure if the objective ever increases or the iterate
/// change stays above the tolerance after max_iters.
PgdSolution minimize_penalized(const SymMatrix& a, double lambda, const PgdSettings& settings = {});

struct OracleCandidate {
  std::string description;
  std::size_t rank = 0;
  double rhs = 0.0;
};

struct OracleCurve {
  std::vector<OracleCandidate> candidates;
  double infimum = 0.0;
};

/// Right-hand side ||S - Sigma||_F^2 + min{2 lambda ||S||_1, kRankBranchConstant lambda^2 rank(S)}
/// over S = 0, S = Sigma and the top-k spectral truncations of Sigma.
OracleCurve oracle_rhs(const SymMatrix& sigma, double lambda, const std::vector<std::size_t>& truncation_ranks);
OracleCurve oracle_rhs(const SpectralDecomposition& sigma_eig, double lambda,
                       const std::vector<std::size_t>& truncation_ranks);

struct OracleVerdict {
  bool event_holds = false;           // lambda >= 2 ||sigma_tilde - sigma||_inf
  std::optional<bool> spectral_ok;    // ||sigma_hat - sigma||_inf <= lambda
  std::optional<bool> frobenius_ok;   // ||sigma_hat - sigma||_F^2 <= frobenius_bound
  double deviation = 0.0;             // ||sigma_tilde - sigma||_inf
  double spectral_error = 0.0;        // ||sigma_hat - sigma||_inf
  double frobenius_sq_error = 0.0;    // ||sigma_hat - sigma||_F^2
  double frobenius_bound = 0.0;       // min{2 lambda ||sigma||_1, kRankBranchConstant lambda^2 rank(sigma)}
};

/// Checks both oracle inequalities with S = Sigma. The inequalities are only
/// evaluated when the event holds; otherwise spectral_ok / frobenius_ok are empty.
OracleVerdict verify_oracle_inequality(const SymMatrix& sigma, const SymMatrix& sigma_hat,
                                       const SymMatrix& sigma_tilde, double lambda);

/// Relative slack applied to the deterministic inequalities to absorb rounding.
inline constexpr double kInequalitySlack = 1e-9;

}  // namespace mcov
