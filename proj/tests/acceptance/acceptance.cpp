// Acceptance gate: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "mcov/cli.hpp"
#include "mcov/error.hpp"
#include "mcov/estimator.hpp"
#include "mcov/experiments.hpp"
#include "mcov/io.hpp"
#include "mcov/oracle.hpp"

using namespace mcov;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("{} {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, title, detail);
  std::fflush(stdout);
}

fs::path config_path(const char* name) { return fs::path(MCOV_SOURCE_DIR) / "configs" / name; }

SymMatrix random_symmetric(std::size_t p, Rng& rng) {
  SymMatrix a(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) a.set(i, j, rng.normal());
  }
  return a;
}

double frobenius(const SymMatrix& a) { return norm(a, NormKind::kFrobenius); }

void closed_form_certification() {
  Rng rng(RngSeed{101});
  std::size_t cases = 0, bad = 0, indefinite = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < 30; ++k) {
    const std::size_t p = 2 + k % 7;
    const SymMatrix a = random_symmetric(p, rng);
    if (!is_psd(a, 0.0)) ++indefinite;
    for (double lambda : {0.1, 1.0, 5.0}) {
      ++cases;
      const double d = frobenius(soft_threshold_psd(a, lambda).matrix - minimize_penalized(a, lambda).minimizer);
      worst = std::max(worst, d);
      if (!(d <= 1e-6)) ++bad;
    }
  }
  report(1, bad == 0 && cases == 90, "closed form equals the penalized minimizer",
         fmt::format("{} cases ({} indefinite inputs), {} failures, worst Frobenius gap {:.2e} (tol 1e-6)", cases,
                     indefinite * 3, bad, worst));
}

void algebraic_identity() {
  Rng rng(RngSeed{202});
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const std::size_t p = 2 + k % 9;
    Matrix b(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) b(i, j) = rng.normal();
    }
    const SymMatrix a = SymMatrix::symmetrized(b * b.transpose());
    for (int j = 1; j <= 10; ++j) {
      const double delta = 0.1 * j;
      const SymMatrix back = debias(population_bias_map(a, delta), delta);
      worst = std::max(worst, norm(back - a, NormKind::kMaxAbsEntry) / std::max(1.0, norm(a, NormKind::kMaxAbsEntry)));
      ++cases;
    }
  }
  report(2, worst <= 1e-12, "debias inverts the bias map",
         fmt::format("{} cases, worst relative entry error {:.2e} (tol 1e-12)", cases, worst));
}

double calibrate_or_report(const ExperimentSpec& spec, double target, std::string& note) {
  try {
    return calibrate_constant(spec, target);
  } catch (const CalibrationFailure& e) {
    note = e.what();
    return std::nan("");
  }
}

void oracle_inequalities_on_event() {
  RunConfig cfg = load_run_config(config_path("event.json"));
  cfg.experiment.threads = 0;
  std::string note;
  const double c_star = calibrate_or_report(cfg.experiment, 0.95, note);
  if (std::isnan(c_star)) {
    report(3, false, "oracle inequalities hold on the event", "calibration failed: " + note);
    return;
  }
  std::size_t replicates = 0, events = 0, violations = 0, failed = 0;
  for (double c : {c_star, c_star / 2.0}) {
    ExperimentSpec spec = cfg.experiment;
    spec.estimator.lambda_rule = DataDrivenLambda{c};
    const auto result = run_experiment(spec);
    for (const auto& p : result.points) {
      replicates += p.replicates.size();
      events += p.event_count;
      failed += p.failed;
      violations += p.spectral_violations + p.frobenius_violations + p.oracle_violations;
    }
  }
  report(3, violations == 0 && failed == 0 && events >= 200, "oracle inequalities hold on the event",
         fmt::format("C*={} and C*/2: {} replicates, {} on the event, {} violations, {} failed", c_star, replicates,
                     events, violations, failed));
}

void unbiasedness() {
  CovarianceSpec cs;
  cs.kind = CovarianceKind::kSpiked;
  cs.p = 10;
  cs.values = {1.0, 0.5, 0.25};
  cs.floor = 0.1;
  cs.rotation_seed = RngSeed{4};
  const SymMatrix sigma = build_covariance(cs);
  const std::size_t reps = 500, n = 2000, p = 10;
  const double delta = 0.5;
  std::vector<double> sum(p * p, 0.0), sumsq(p * p, 0.0);
  for (std::size_t r = 0; r < reps; ++r) {
    const Matrix x = sample_gaussian(sigma, n, derive_seed(RngSeed{404}, {r, 0}));
    const SymMatrix t = debias(masked_empirical_cov(apply_mask(x, delta, derive_seed(RngSeed{404}, {r, 1}))), delta);
    for (std::size_t k = 0; k < p * p; ++k) {
      sum[k] += t.data()[k];
      sumsq[k] += t.data()[k] * t.data()[k];
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < p * p; ++k) {
    const double mean = sum[k] / reps;
    const double var = (sumsq[k] - reps * mean * mean) / (reps - 1);
    const double se = std::sqrt(var / reps);
    worst = std::max(worst, std::abs(mean - sigma.data()[k]) / se);
  }
  report(4, worst <= 5.0, "debiased covariance is unbiased",
         fmt::format("R={} n={} p={} delta={}: worst entry deviation {:.2f} standard errors (tol 5)", reps, n, p,
                     delta, worst));
}

void rate_scalings() {
  RunConfig cfg = load_run_config(config_path("acceptance.json"));
  cfg.experiment.threads = 0;
  const auto& rule = std::get<DataDrivenLambda>(cfg.experiment.estimator.lambda_rule);
  std::string note;
  const double c_star = calibrate_or_report(cfg.experiment, 0.95, note);
  const bool recorded = !std::isnan(c_star) && c_star == rule.constant;

  const auto result = run_experiment(cfg.experiment);
  const auto verdicts = evaluate_verdicts(result, cfg.verdicts);

  std::string rate_detail, dev_detail;
  bool rate_ok = recorded, dev_ok = recorded;
  std::size_t rate_seen = 0, dev_seen = 0;
  for (const auto& v : verdicts) {
    if (v.name.rfind("slope:frobenius_sq_error:", 0) == 0) {
      rate_ok = rate_ok && v.passed;
      ++rate_seen;
      rate_detail += fmt::format("; {} {}", v.name.substr(6), v.detail);
    } else if (v.name.rfind("slope:deviation:delta", 0) == 0) {
      dev_ok = dev_ok && v.passed;
      ++dev_seen;
      dev_detail += fmt::format("; {} {}", v.name.substr(6), v.detail);
    } else if (!v.passed) {
      rate_ok = dev_ok = false;
      rate_detail += fmt::format("; {} failed: {}", v.name, v.detail);
    }
  }

  // The deviation fit needs n large enough for the sample-size condition at every delta.
  const SymMatrix sigma = build_covariance(cfg.experiment.covariance);
  const std::size_t n_max = cfg.experiment.n_values.back();
  bool size_ok = true;
  for (double d : cfg.experiment.delta_values) size_ok = size_ok && sample_size_check(sigma, d, n_max, 1.0);

  const std::string constant = fmt::format("C={} (calibrated {})", rule.constant, std::isnan(c_star) ? -1.0 : c_star);
  report(5, rate_ok && rate_seen == 2, "error rate in n and delta", constant + rate_detail);
  report(6, dev_ok && dev_seen == 1 && size_ok, "deviation rate in delta",
         constant + fmt::format("; sample-size condition at n={}: {}", n_max, size_ok ? "met" : "not met") +
             dev_detail);
}

void coverage_on_fresh_seed() {
  RunConfig cfg = load_run_config(config_path("event.json"));
  cfg.experiment.threads = 0;
  std::string note;
  const double c_star = calibrate_or_report(cfg.experiment, 0.95, note);
  if (std::isnan(c_star)) {
    report(7, false, "coverage of the event on a fresh seed", "calibration failed: " + note);
    return;
  }
  ExperimentSpec fresh = cfg.experiment;
  fresh.base_seed = RngSeed{cfg.experiment.base_seed.value + 1};
  const auto table = coverage_table(fresh);
  double coverage = -1.0;
  for (const auto& row : table.rows) {
    if (row.constant == c_star) coverage = row.coverage;
  }
  report(7, coverage >= 0.90, "coverage of the event on a fresh seed",
         fmt::format("C*={}, fresh-seed coverage {:.4f} (min over grid points, need >= 0.90)", c_star, coverage));
}

void eigensolver_substrate() {
  Rng rng(RngSeed{808});
  double worst_rec = 0.0, worst_orth = 0.0;
  for (std::size_t k = 0; k < 200; ++k) {
    const std::size_t p = 1 + k % 50;
    const SymMatrix a = random_symmetric(p, rng);
    const auto eig = eig_sym(a);
    const double rec = frobenius(reconstruct(eig.eigenvectors, eig.eigenvalues) - a) / std::max(1e-300, frobenius(a));
    worst_rec = std::max(worst_rec, rec);
    const Matrix utu = eig.eigenvectors.transpose() * eig.eigenvectors;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) worst_orth = std::max(worst_orth, std::abs(utu(i, j) - (i == j ? 1.0 : 0.0)));
    }
  }
  report(8, worst_rec <= 1e-10 && worst_orth <= 1e-10, "eigendecomposition accuracy",
         fmt::format("200 matrices up to dim 50: reconstruction {:.2e}, orthonormality {:.2e} (tol 1e-10)", worst_rec,
                     worst_orth));
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "mcov_acceptance_determinism";
  fs::remove_all(root);
  const std::string cfg = config_path("acceptance.json").string();
  std::ostringstream out, err;
  const int a = run_cli({"simulate", "--config", cfg, "--out-dir", (root / "a").string()}, out, err);
  const int b = run_cli({"simulate", "--config", cfg, "--out-dir", (root / "b").string(), "--threads", "1"}, out, err);
  bool same = a == kExitOk && b == kExitOk;
  std::string detail = fmt::format("exit codes {} and {}", a, b);
  for (const char* f : {"results.csv", "results.json", "verdicts.json"}) {
    if (!same) break;
    const bool eq = read_text_file(root / "a" / f) == read_text_file(root / "b" / f);
    same = same && eq;
    detail += fmt::format("; {} {}", f, eq ? "identical" : "differs");
  }
  fs::remove_all(root);
  report(9, same, "simulate is byte-for-byte reproducible", detail);
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  try {
    closed_form_certification();
    algebraic_identity();
    oracle_inequalities_on_event();
    unbiasedness();
    rate_scalings();
    coverage_on_fresh_seed();
    eigensolver_substrate();
    determinism();
  } catch (const std::exception& e) {
    fmt::print("FAIL  - unexpected error: {}\n", e.what());
    return 1;
  }
  fmt::print(
      "N/A  10 minimax lower bound and absolute constants: not reproducible by simulation; exponents are checked "
      "in 5-6 and the constants above are empirical calibrations\n");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fmt::print("{} of 9 checked criteria passed in {:.1f} s\n", 9 - failures, secs);
  return failures == 0 ? 0 : 1;
}
