#include "mcov/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "mcov/error.hpp"
#include "mcov/oracle.hpp"

namespace mcov {

namespace {

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

EstimatorConfig resolve_config(const EstimatorConfig& base, double delta) {
  EstimatorConfig cfg = base;
  if (std::holds_alternative<KnownDelta>(cfg.delta_source)) cfg.delta_source = KnownDelta{delta};
  return cfg;
}

MaskedData simulate_replicate(const SymMatrix& sigma, RngSeed base, std::size_t grid_index, std::size_t replicate,
                              std::size_t n, double delta) {
  const Matrix x = sample_gaussian(sigma, n, derive_seed(base, {grid_index, replicate, 0}));
  return apply_mask(x, delta, derive_seed(base, {grid_index, replicate, 1}));
}

template <class Get>
MetricSummary summarize(const std::vector<ReplicateRecord>& records, Get get) {
  double sum = 0.0;
  std::size_t m = 0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    sum += get(r);
    ++m;
  }
  if (m == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = sum / static_cast<double>(m);
  if (m == 1) return {mean, 0.0};
  double ss = 0.0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    const double d = get(r) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  return {mean, sd / std::sqrt(static_cast<double>(m))};
}

void aggregate(GridPointResult& point) {
  const auto& recs = point.replicates;
  point.completed = static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [](auto& r) { return r.ok; }));
  point.failed = recs.size() - point.completed;
  point.frobenius_sq_error = summarize(recs, [](auto& r) { return r.frobenius_sq_error; });
  point.spectral_error = summarize(recs, [](auto& r) { return r.spectral_error; });
  point.deviation = summarize(recs, [](auto& r) { return r.deviation; });
  point.lambda = summarize(recs, [](auto& r) { return r.lambda; });
  point.rank_hat = summarize(recs, [](auto& r) { return static_cast<double>(r.rank_hat); });
  point.delta_used = summarize(recs, [](auto& r) { return r.delta_used; });
  for (const auto& r : recs) {
    if (!r.ok) continue;
    if (r.event) ++point.event_count;
    if (r.spectral_ok == false) ++point.spectral_violations;
    if (r.frobenius_ok == false) ++point.frobenius_violations;
    if (r.oracle_ok == false) ++point.oracle_violations;
  }
  point.event_frequency =
      point.completed == 0 ? 0.0 : static_cast<double>(point.event_count) / static_cast<double>(point.completed);
}

double metric_mean(const GridPointResult& point, const std::string& metric) {
  if (metric == "frobenius_sq_error") return point.frobenius_sq_error.mean;
  if (metric == "spectral_error") return point.spectral_error.mean;
  return point.deviation.mean;
}

std::vector<SlopeFit> fit_all(const ExperimentSpec& spec, const std::vector<GridPointResult>& points) {
  static const char* const kMetrics[] = {"frobenius_sq_error", "spectral_error", "deviation"};
  const std::size_t nd = spec.delta_values.size();
  std::vector<SlopeFit> fits;
  auto try_fit = [&](const char* metric, const char* axis, double fixed, const std::vector<double>& xs,
                     const std::vector<double>& ys) {
    if (xs.size() < 3) return;
    for (double y : ys) {
      if (!(y > 0.0) || !std::isfinite(y)) return;
    }
    fits.push_back({metric, axis, fixed, fit_loglog_slope(xs, ys)});
  };
  for (const char* metric : kMetrics) {
    for (std::size_t id = 0; id < nd; ++id) {
      std::vector<double> xs, ys;
      for (std::size_t in = 0; in < spec.n_values.size(); ++in) {
        xs.push_back(static_cast<double>(spec.n_values[in]));
        ys.push_back(metric_mean(points[in * nd + id], metric));
      }
      try_fit(metric, "n", spec.delta_values[id], xs, ys);
    }
    for (std::size_t in = 0; in < spec.n_values.size(); ++in) {
      std::vector<double> xs, ys;
      for (std::size_t id = 0; id < nd; ++id) {
        xs.push_back(spec.delta_values[id]);
        ys.push_back(metric_mean(points[in * nd + id], metric));
      }
      try_fit(metric, "delta", static_cast<double>(spec.n_values[in]), xs, ys);
    }
  }
  return fits;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (replicates == 0) throw DomainError("replicates must be at least 1");
  if (n_values.empty()) throw DomainError("the n grid must not be empty");
  if (delta_values.empty()) throw DomainError("the delta grid must not be empty");
  for (std::size_t n : n_values) {
    if (n == 0) throw DomainError("grid sample sizes must be at least 1");
  }
  for (double d : delta_values) require_valid_delta(d);
  EstimatorConfig probe = resolve_config(estimator, delta_values.front());
  probe.validate();
}

LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DomainError("slope fit needs equally many x and y values");
  if (xs.size() < 3) throw DomainError(fmt::format("slope fit needs at least 3 points, got {}", xs.size()));
  const std::size_t m = xs.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("slope fit needs positive values");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw DomainError("slope fit needs at least two distinct x values");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    rss += r * r;
  }
  fit.half_width = 2.0 * std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  return fit;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const SymMatrix sigma = build_covariance(spec.covariance);
  const auto sigma_eig = eig_sym(sigma);
  std::vector<std::size_t> ranks(sigma.dim());
  for (std::size_t k = 0; k < ranks.size(); ++k) ranks[k] = k + 1;

  const std::size_t nd = spec.delta_values.size();
  ExperimentResult result;
  result.points.resize(spec.grid_size());
  for (std::size_t g = 0; g < spec.grid_size(); ++g) {
    auto& point = result.points[g];
    point.grid_index = g;
    point.n = spec.n_values[g / nd];
    point.delta = spec.delta_values[g % nd];
    point.replicates.resize(spec.replicates);
  }

  parallel_for(spec.grid_size() * spec.replicates, spec.threads, [&](std::size_t task) {
    const std::size_t g = task / spec.replicates;
    const std::size_t r = task % spec.replicates;
    auto& point = result.points[g];
    ReplicateRecord& rec = point.replicates[r];
    rec.index = r;
    try {
      const MaskedData data = simulate_replicate(sigma, spec.base_seed, g, r, point.n, point.delta);
      const EstimateReport report = estimate(data, resolve_config(spec.estimator, point.delta));
      const OracleVerdict verdict =
          verify_oracle_inequality(sigma, report.sigma_hat, report.sigma_tilde, report.lambda_used);
      rec.frobenius_sq_error = verdict.frobenius_sq_error;
      rec.spectral_error = verdict.spectral_error;
      rec.deviation = verdict.deviation;
      rec.lambda = report.lambda_used;
      rec.delta_used = report.delta_used;
      rec.rank_hat = report.rank_hat;
      rec.event = verdict.event_holds;
      rec.spectral_ok = verdict.spectral_ok;
      rec.frobenius_ok = verdict.frobenius_ok;
      if (rec.event) {
        const double infimum = oracle_rhs(sigma_eig, report.lambda_used, ranks).infimum;
        rec.oracle_ok = rec.frobenius_sq_error <= infimum + kInequalitySlack * std::max(infimum, 1.0);
      }
      rec.ok = true;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  for (auto& point : result.points) aggregate(point);
  result.fits = fit_all(spec, result.points);
  return result;
}

std::vector<Verdict> evaluate_verdicts(const ExperimentResult& result, const VerdictSpec& spec) {
  std::vector<Verdict> out;

  {
    Verdict v{"replicate_failures", false, ""};
    double worst = 0.0;
    for (const auto& p : result.points) {
      worst = std::max(worst, static_cast<double>(p.failed) / static_cast<double>(p.replicates.size()));
    }
    v.passed = worst <= spec.max_failure_fraction;
    v.detail = fmt::format("worst grid-point failure fraction {:.4f}, allowed {}", worst, spec.max_failure_fraction);
    out.push_back(std::move(v));
  }

  if (spec.oracle_inequalities) {
    std::size_t events = 0, spectral = 0, frobenius = 0, oracle = 0;
    for (const auto& p : result.points) {
      events += p.event_count;
      spectral += p.spectral_violations;
      frobenius += p.frobenius_violations;
      oracle += p.oracle_violations;
    }
    out.push_back({"spectral_bound", spectral == 0,
                   fmt::format("{} violations on {} event replicates", spectral, events)});
    out.push_back({"frobenius_bound", frobenius == 0,
                   fmt::format("{} violations on {} event replicates", frobenius, events)});
    out.push_back({"oracle_dominance", oracle == 0,
                   fmt::format("{} violations on {} event replicates", oracle, events)});
  }

  for (const auto& crit : spec.slopes) {
    bool matched = false;
    for (const auto& f : result.fits) {
      if (f.metric != crit.metric || f.axis != crit.axis) continue;
      if (crit.at && std::abs(f.fixed_value - *crit.at) > 1e-12 * std::max(1.0, std::abs(*crit.at))) continue;
      matched = true;
      const bool ok = f.fit.slope >= crit.min && f.fit.slope <= crit.max;
      out.push_back({fmt::format("slope:{}:{}@{}", f.metric, f.axis, f.fixed_value), ok,
                     fmt::format("slope {:.4f} (+/- {:.4f}), allowed [{}, {}]", f.fit.slope, f.fit.half_width,
                                 crit.min, crit.max)});
    }
    if (!matched) {
      out.push_back({fmt::format("slope:{}:{}", crit.metric, crit.axis), false,
                     "no fitted line matches this criterion (need >= 3 grid values on the axis)"});
    }
  }
  return out;
}

std::vector<double> calibration_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 8; ++k) grid.push_back(std::ldexp(1.0, k) / 8.0);
  return grid;
}

CoverageTable coverage_table(const ExperimentSpec& spec) {
  spec.validate();
  const SymMatrix sigma = build_covariance(spec.covariance);
  const std::vector<double> grid = calibration_grid();
  const std::size_t nd = spec.delta_values.size();
  const std::size_t total = spec.grid_size() * spec.replicates;

  // covered[task * |grid| + k]: replicate task is on the event for grid constant k.
  std::vector<std::uint8_t> covered(total * grid.size(), 0);
  std::vector<std::uint8_t> failed(total, 0);

  parallel_for(total, spec.threads, [&](std::size_t task) {
    const std::size_t g = task / spec.replicates;
    const std::size_t r = task % spec.replicates;
    const std::size_t n = spec.n_values[g / nd];
    const double true_delta = spec.delta_values[g % nd];
    try {
      const MaskedData data = simulate_replicate(sigma, spec.base_seed, g, r, n, true_delta);
      const EstimatorConfig cfg = resolve_config(spec.estimator, true_delta);
      const double delta = std::holds_alternative<KnownDelta>(cfg.delta_source)
                               ? std::get<KnownDelta>(cfg.delta_source).value
                               : estimate_delta(data);
      if (delta == 0.0) throw DomainError("estimated delta is 0");
      const SymMatrix tilde = debias(masked_empirical_cov(data), delta);
      const double deviation = norm(tilde - sigma, NormKind::kSpectral);
      const double trace = tilde.trace();
      if (trace < 0.0) return;  // lambda undefined: not covered for any constant
      const double spectral = norm(tilde, NormKind::kSpectral);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double lambda = data_driven_lambda(trace, spectral, sigma.dim(), delta, n, grid[k]);
        covered[task * grid.size() + k] = lambda >= 2.0 * deviation ? 1 : 0;
      }
    } catch (const Error&) {
      failed[task] = 1;
    }
  });

  CoverageTable table;
  table.failed_replicates = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), std::uint8_t{1}));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CoverageRow row{grid[k], 1.0, {}};
    for (std::size_t g = 0; g < spec.grid_size(); ++g) {
      std::size_t hits = 0, valid = 0;
      for (std::size_t r = 0; r < spec.replicates; ++r) {
        const std::size_t task = g * spec.replicates + r;
        if (failed[task]) continue;
        ++valid;
        hits += covered[task * grid.size() + k];
      }
      const double cov = valid == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(valid);
      row.per_point.push_back(cov);
      row.coverage = std::min(row.coverage, cov);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::optional<double> select_constant(const CoverageTable& table, double target) {
  for (const auto& row : table.rows) {
    if (row.coverage >= target) return row.constant;
  }
  return std::nullopt;
}

double calibrate_constant(const ExperimentSpec& spec, double target_coverage) {
  if (!(target_coverage >= 0.0 && target_coverage < 1.0)) {
    throw DomainError(fmt::format("target coverage must lie in [0, 1), got {}", target_coverage));
  }
  const CoverageTable table = coverage_table(spec);
  if (auto c = select_constant(table, target_coverage)) return *c;
  const double best = table.rows.empty() ? 0.0 : table.rows.back().coverage;
  throw CalibrationFailure(fmt::format("no constant up to {} reaches coverage {} (best {:.4f})",
                                       table.rows.back().constant, target_coverage, best),
                           best);
}

}  // namespace mcov
