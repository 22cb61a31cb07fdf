#include "mcov/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <ostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mcov/error.hpp"
#include "mcov/estimator.hpp"
#include "mcov/experiments.hpp"
#include "mcov/io.hpp"

namespace mcov {

namespace fs = std::filesystem;

namespace {

struct EstimateFlags {
  std::string input;
  std::string mask;
  std::string missing_token;
  bool header = false;
  std::string delta = "auto";
  std::string lambda = "auto";
  double lambda_constant = 1.0;
  double c1 = 1.0;
  double bound_constant = 1.0;
  double sample_size_constant = 1.0;
  std::string out;
  std::string report;
  std::uint64_t seed = 0;
};

struct SimulateFlags {
  std::string config;
  std::string out_dir;
  bool no_verdict = false;
  int threads = -1;
};

struct CalibrateFlags {
  std::string config;
  double coverage = 0.95;
  std::string out;
  int threads = -1;
};

std::optional<double> parse_auto_or_number(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw SchemaError(flag, fmt::format("expected 'auto' or a number, got '{}'", text));
  }
  return value;
}

int cmd_estimate(const EstimateFlags& f, std::ostream& out) {
  const bool have_mask_file = !f.mask.empty();
  if (have_mask_file && !f.missing_token.empty()) {
    throw SchemaError("--mask/--missing-token", "choose exactly one mask encoding");
  }

  CsvOptions options;
  options.header = f.header;
  if (!have_mask_file) options.missing_token = f.missing_token.empty() ? "NA" : f.missing_token;
  CsvTable table = read_matrix_csv(f.input, options);
  if (have_mask_file) {
    CsvTable mask = parse_mask_csv(read_text_file(f.mask), f.header);
    if (mask.values.rows() != table.values.rows() || mask.values.cols() != table.values.cols()) {
      throw ParseError(1, 1,
                       fmt::format("mask file is {}x{} but the data is {}x{}", mask.values.rows(),
                                   mask.values.cols(), table.values.rows(), table.values.cols()));
    }
    for (std::size_t k = 0; k < table.mask.size(); ++k) {
      table.mask[k] = mask.values.data()[k] != 0.0 ? 1 : 0;
    }
  }

  EstimatorConfig cfg;
  const auto delta = parse_auto_or_number(f.delta, "--delta");
  if (delta) {
    cfg.delta_source = KnownDelta{*delta};
  } else {
    cfg.delta_source = DeltaFromMask{};
  }
  const auto lambda = parse_auto_or_number(f.lambda, "--lambda");
  if (lambda) {
    cfg.lambda_rule = FixedLambda{*lambda};
  } else {
    cfg.lambda_rule = DataDrivenLambda{f.lambda_constant};
  }
  cfg.c1 = f.c1;
  cfg.bound_constant = f.bound_constant;
  cfg.sample_size_constant = f.sample_size_constant;

  const std::size_t n = table.values.rows();
  const MaskedData data(std::move(table.values), std::move(table.mask));
  const EstimateReport report = estimate(data, cfg);

  EstimateContext ctx;
  ctx.seed = f.seed;
  ctx.delta_estimated = !delta.has_value();
  ctx.lambda_rule = cfg.lambda_rule;
  ctx.bound_constant = cfg.bound_constant;
  ctx.c1 = cfg.c1;
  ctx.n = n;
  const std::string matrix_text = format_matrix_csv(report.sigma_hat);
  const std::string report_text = report_json(report, ctx).dump(2) + "\n";

  write_file_atomic(f.out, matrix_text);
  if (!f.report.empty()) write_file_atomic(f.report, report_text);
  out << fmt::format("delta={} lambda={} rank={}\n", format_number(report.delta_used),
                     format_number(report.lambda_used), report.rank_hat);
  return kExitOk;
}

int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(f.config);
  if (f.threads >= 0) cfg.experiment.threads = static_cast<unsigned>(f.threads);
  const ExperimentResult result = run_experiment(cfg.experiment);
  const std::vector<Verdict> verdicts = evaluate_verdicts(result, cfg.verdicts);

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  write_file_atomic(dir / "results.csv", results_csv(result));
  write_file_atomic(dir / "results.json", results_json(result).dump(2) + "\n");
  write_file_atomic(dir / "verdicts.json", verdicts_json(verdicts, result).dump(2) + "\n");

  bool all = true;
  for (const auto& v : verdicts) {
    out << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
    all = all && v.passed;
  }
  if (!all && !f.no_verdict) {
    err << "error: one or more verdicts failed (see verdicts.json)\n";
    return kExitVerdict;
  }
  return kExitOk;
}

int cmd_calibrate(const CalibrateFlags& f, std::ostream& out, std::ostream& err) {
  if (!(f.coverage >= 0.0 && f.coverage < 1.0)) {
    throw SchemaError("--coverage", fmt::format("expected a value in [0, 1), got {}", f.coverage));
  }
  RunConfig cfg = load_run_config(f.config);
  if (f.threads >= 0) cfg.experiment.threads = static_cast<unsigned>(f.threads);
  const CoverageTable table = coverage_table(cfg.experiment);
  const auto selected = select_constant(table, f.coverage);
  write_file_atomic(f.out, calibration_json(table, f.coverage, selected, cfg.experiment).dump(2) + "\n");
  for (const auto& row : table.rows) out << fmt::format("C={} coverage={:.4f}\n", row.constant, row.coverage);
  if (!selected) {
    err << fmt::format("error: calibration failed, best coverage {:.4f} at C={} is below {}\n",
                       table.rows.back().coverage, table.rows.back().constant, f.coverage);
    return kExitCalibration;
  }
  out << fmt::format("selected C={}\n", *selected);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kParse:
    case ErrorKind::kSchema:
    case ErrorKind::kIo:
      return kExitInput;
    case ErrorKind::kDomain:
      return kExitDomain;
    case ErrorKind::kCalibration:
      return kExitCalibration;
    case ErrorKind::kNumeric:
      return kExitNumeric;
  }
  return kExitNumeric;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank covariance estimation from data with entries missing at random"};
  app.name("mcov");
  app.require_subcommand(1);

  EstimateFlags ef;
  auto* est = app.add_subcommand("estimate", "Estimate the covariance of a data file");
  est->add_option("--input", ef.input, "Data matrix (CSV, one sample per row)")->required();
  est->add_option("--mask", ef.mask, "Companion 0/1 mask file");
  est->add_option("--missing-token", ef.missing_token, "Inline missing-value token (default NA)");
  est->add_flag("--header", ef.header, "Input files carry a header line");
  est->add_option("--delta", ef.delta, "Observation probability or 'auto'")->capture_default_str();
  est->add_option("--lambda", ef.lambda, "Regularization or 'auto'")->capture_default_str();
  est->add_option("--lambda-constant", ef.lambda_constant, "Constant C of the data-driven lambda")
      ->capture_default_str();
  est->add_option("--c1", ef.c1, "Sub-gaussian moment constant")->capture_default_str();
  est->add_option("--bound-constant", ef.bound_constant, "Constant of the deviation envelopes")
      ->capture_default_str();
  est->add_option("--sample-size-constant", ef.sample_size_constant, "Constant of the sample-size check")
      ->capture_default_str();
  est->add_option("--out", ef.out, "Output matrix file")->required();
  est->add_option("--report", ef.report, "Output JSON report");
  est->add_option("--seed", ef.seed, "Seed recorded in the report")->capture_default_str();

  SimulateFlags sf;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo sweep");
  sim->add_option("--config", sf.config, "Run configuration (JSON)")->required();
  sim->add_option("--out-dir", sf.out_dir, "Output directory")->required();
  sim->add_flag("--no-verdict", sf.no_verdict, "Report verdicts without failing");
  sim->add_option("--threads", sf.threads, "Worker threads (0 = all cores); overrides the config");

  CalibrateFlags cf;
  auto* cal = app.add_subcommand("calibrate", "Calibrate the data-driven lambda constant");
  cal->add_option("--config", cf.config, "Run configuration (JSON)")->required();
  cal->add_option("--coverage", cf.coverage, "Target coverage of the good event")->capture_default_str();
  cal->add_option("--out", cf.out, "Output JSON")->required();
  cal->add_option("--threads", cf.threads, "Worker threads (0 = all cores); overrides the config");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*est) return cmd_estimate(ef, out);
    if (*sim) return cmd_simulate(sf, out, err);
    return cmd_calibrate(cf, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace mcov
