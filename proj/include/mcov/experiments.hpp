/**
 * @file experiments.hpp
 * @brief Seeded Monte Carlo harness for the penalized covariance estimator.
 *
 * A sweep runs `replicates` independent simulations at every (n, delta) grid
 * point. Grid points are ordered n-major: index g = i_n * |deltas| + i_delta.
 * Replicate r at grid point g draws its data from substream (g, r, 0) and its
 * mask from substream (g, r, 1) of the base seed, so results do not depend on
 * the number of worker threads.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mcov/estimator.hpp"
#include "mcov/model.hpp"
#include "mcov/rng.hpp"

namespace mcov {

struct ExperimentSpec {
  CovarianceSpec covariance;
  std::vector<std::size_t> n_values;
  std::vector<double> delta_values;
  std::size_t replicates = 1;
  /// A KnownDelta source is resolved to each grid point's true delta.
  EstimatorConfig estimator;
  RngSeed base_seed;
  unsigned threads = 1;

  void validate() const;
  std::size_t grid_size() const { return n_values.size() * delta_values.size(); }
};

struct ReplicateRecord {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  double frobenius_sq_error = 0.0;  // ||sigma_hat - sigma||_F^2
  double spectral_error = 0.0;      // ||sigma_hat - sigma||_inf
  double deviation = 0.0;           // ||sigma_tilde - sigma||_inf
  double lambda = 0.0;
  double delta_used = 0.0;
  std::size_t rank_hat = 0;
  bool event = false;               // lambda >= 2 * deviation
  std::optional<bool> spectral_ok;
  std::optional<bool> frobenius_ok;
  std::optional<bool> oracle_ok;    // realized loss <= oracle_rhs infimum
};

struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;
};

struct GridPointResult {
  std::size_t grid_index = 0;
  std::size_t n = 0;
  double delta = 1.0;
  std::vector<ReplicateRecord> replicates;

  std::size_t completed = 0;
  std::size_t failed = 0;
  MetricSummary frobenius_sq_error;
  MetricSummary spectral_error;
  MetricSummary deviation;
  MetricSummary lambda;
  MetricSummary rank_hat;
  MetricSummary delta_used;
  std::size_t event_count = 0;
  double event_frequency = 0.0;
  std::size_t spectral_violations = 0;
  std::size_t frobenius_violations = 0;
  std::size_t oracle_violations = 0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // two standard errors of the slope
};

struct SlopeFit {
  std::string metric;  // "frobenius_sq_error" | "spectral_error" | "deviation"
  std::string axis;    // "n" (at fixed delta) | "delta" (at fixed n)
  double fixed_value = 0.0;
  LogLogFit fit;
};

struct ExperimentResult {
  std::vector<GridPointResult> points;
  std::vector<SlopeFit> fits;
};

/// Ordinary least squares of log(ys) on log(xs). Needs >= 3 positive points.
LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

ExperimentResult run_experiment(const ExperimentSpec& spec);

struct SlopeCriterion {
  std::string metric;
  std::string axis;
  std::optional<double> at;  // restrict to the line at this fixed value
  double min = 0.0;
  double max = 0.0;
};

struct VerdictSpec {
  double max_failure_fraction = 0.01;
  bool oracle_inequalities = true;
  std::vector<SlopeCriterion> slopes;
};

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<Verdict> evaluate_verdicts(const ExperimentResult& result, const VerdictSpec& spec);

/// Candidate constants 2^k / 8 for k = 0..8.
std::vector<double> calibration_grid();

struct CoverageRow {
  double constant = 0.0;
  double coverage = 0.0;                 // minimum over grid points
  std::vector<double> per_point;         // one entry per grid point
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
  std::size_t failed_replicates = 0;
};

/// Event frequency of lambda(C) >= 2 ||sigma_tilde - sigma||_inf for every C on
/// the calibration grid, lambda(C) being the data-driven rule with constant C.
CoverageTable coverage_table(const ExperimentSpec& spec);

/// Smallest grid constant whose coverage reaches `target`, if any.
std::optional<double> select_constant(const CoverageTable& table, double target);

/// Throws CalibrationFailure when no grid constant reaches `target`.
double calibrate_constant(const ExperimentSpec& spec, double target_coverage);

}  // namespace mcov
