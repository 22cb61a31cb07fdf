#include <cmath>

#include "doctest.h"
#include "mcov/error.hpp"
#include "mcov/estimator.hpp"
#include "mcov/oracle.hpp"
#include "test_util.hpp"

using namespace mcov;

TEST_SUITE("oracle") {

TEST_CASE("minimize_penalized on closed-form cases") {
  const double d[] = {3.0, 1.0};
  const auto sol = minimize_penalized(SymMatrix::diagonal(d), 4.0);
  const double expected[] = {1.0, 0.0};
  CHECK(test::frobenius_diff(sol.minimizer, SymMatrix::diagonal(expected)) <= 1e-6);
  CHECK(sol.objective == doctest::Approx(penalized_objective(SymMatrix::diagonal(d), sol.minimizer, 4.0)));

  const auto psd = test::random_psd(4, 12);
  CHECK(test::frobenius_diff(minimize_penalized(psd, 0.0).minimizer, psd) <= 1e-8);
}

TEST_CASE("minimize_penalized agrees with soft-thresholding") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto a = test::random_symmetric(5, seed * 13);
    for (double lambda : {0.1, 1.0, 5.0}) {
      const auto pgd = minimize_penalized(a, lambda).minimizer;
      const auto closed = soft_threshold_psd(a, lambda).matrix;
      CHECK(test::frobenius_diff(pgd, closed) <= 1e-6);
    }
  }
}

TEST_CASE("minimize_penalized failure modes") {
  const auto a = test::random_symmetric(4, 3);
  PgdSettings tight;
  tight.max_iters = 1;
  CHECK_THROWS_AS(minimize_penalized(a, 0.5, tight), NumericFailure);

  PgdSettings bad;
  bad.step_size = 0.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad.step_size = 0.1;
  bad.convergence_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(minimize_penalized(a, -1.0), DomainError);
}

TEST_CASE("project_psd clips negative eigenvalues") {
  const auto p = project_psd(SymMatrix::from_rows_strict({{1, 2}, {2, 1}}));
  const auto eig = eig_sym(p);
  CHECK(eig.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(std::abs(eig.eigenvalues[1]) <= 1e-12);
}

TEST_CASE("oracle_rhs candidates") {
  const double d[] = {3.0, 1.0, 0.0};
  const auto sigma = SymMatrix::diagonal(d);
  const auto curve = oracle_rhs(sigma, 1.0, {1, 2});
  REQUIRE(curve.candidates.size() == 4);
  CHECK(curve.candidates[0].rank == 0);
  CHECK(curve.candidates[0].rhs == doctest::Approx(10.0));
  CHECK(curve.candidates[1].rhs == doctest::Approx(1.0 + kRankBranchConstant).epsilon(1e-12));
  CHECK(curve.candidates[2].rhs == doctest::Approx(2.0 * kRankBranchConstant).epsilon(1e-12));
  CHECK(curve.candidates[3].rhs == doctest::Approx(2.0 * kRankBranchConstant).epsilon(1e-12));
  CHECK(curve.infimum == doctest::Approx(1.45711).epsilon(1e-5));

  CHECK(oracle_rhs(sigma, 0.0, {1}).infimum == doctest::Approx(0.0));
  CHECK(kRankBranchConstant == doctest::Approx((1.0 + std::sqrt(2.0)) * (1.0 + std::sqrt(2.0)) / 8.0));
  CHECK_THROWS_AS(oracle_rhs(sigma, 1.0, {4}), DomainError);
  CHECK_THROWS_AS(oracle_rhs(SymMatrix::from_rows_strict({{1, 2}, {2, 1}}), 1.0, {}), DomainError);
}

TEST_CASE("verify_oracle_inequality") {
  const auto sigma = test::random_psd(4, 40);
  const auto v = verify_oracle_inequality(sigma, sigma, sigma, 0.1);
  CHECK(v.event_holds);
  CHECK(v.spectral_ok == std::optional<bool>(true));
  CHECK(v.frobenius_ok == std::optional<bool>(true));

  const auto tilde = sigma + SymMatrix::identity(4);
  const auto off = verify_oracle_inequality(sigma, sigma, tilde, 1.0);
  CHECK_FALSE(off.event_holds);
  CHECK_FALSE(off.spectral_ok.has_value());
  CHECK_FALSE(off.frobenius_ok.has_value());
  CHECK(off.deviation == doctest::Approx(1.0));

  // A wrong estimate on the event must be flagged.
  const auto wrong = verify_oracle_inequality(sigma, sigma + SymMatrix::identity(4) * 5.0, sigma, 0.1);
  CHECK(wrong.spectral_ok == std::optional<bool>(false));
  CHECK(wrong.frobenius_ok == std::optional<bool>(false));
}

TEST_CASE("no oracle violations along the estimation pipeline") {
  CovarianceSpec spec;
  spec.kind = CovarianceKind::kSpiked;
  spec.p = 20;
  spec.values = {1.0, 0.5, 0.25};
  spec.rotation_seed = RngSeed{3};
  const auto sigma = build_covariance(spec);
  const auto sigma_eig = eig_sym(sigma);
  EstimatorConfig cfg;
  cfg.delta_source = KnownDelta{0.8};
  cfg.lambda_rule = DataDrivenLambda{4.0};

  std::vector<std::size_t> ranks(20);
  for (std::size_t k = 0; k < 20; ++k) ranks[k] = k + 1;

  int events = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const Matrix x = sample_gaussian(sigma, 4000, derive_seed(RngSeed{555}, {r, 0}));
    const auto report = estimate(apply_mask(x, 0.8, derive_seed(RngSeed{555}, {r, 1})), cfg);
    const auto v = verify_oracle_inequality(sigma, report.sigma_hat, report.sigma_tilde, report.lambda_used);
    if (!v.event_holds) continue;
    ++events;
    CHECK(*v.spectral_ok);
    CHECK(*v.frobenius_ok);
    const double infimum = oracle_rhs(sigma_eig, report.lambda_used, ranks).infimum;
    CHECK(v.frobenius_sq_error <= infimum * (1.0 + kInequalitySlack) + kInequalitySlack);
  }
  CHECK(events > 0);
}

}  // TEST_SUITE
