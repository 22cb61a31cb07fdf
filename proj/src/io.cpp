#include "mcov/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mcov/error.hpp"

namespace mcov {

using nlohmann::json;

namespace {

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based, start of the trimmed field
};

std::vector<std::pair<std::size_t, std::string_view>> split_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line_no++, line);
    if (end == text.size()) break;
    start = end + 1;
  }
  // Trailing blank lines are not data.
  while (!lines.empty() && lines.back().second.find_first_not_of(" \t") == std::string_view::npos) lines.pop_back();
  return lines;
}

std::vector<Field> split_fields(std::string_view line) {
  std::vector<Field> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) end = line.size();
    std::string_view raw = line.substr(start, end - start);
    std::size_t lead = raw.find_first_not_of(" \t");
    if (lead == std::string_view::npos) {
      fields.push_back({std::string_view{}, start + 1});
    } else {
      std::size_t trail = raw.find_last_not_of(" \t");
      fields.push_back({raw.substr(lead, trail - lead + 1), start + lead + 1});
    }
    if (end == line.size()) break;
    start = end + 1;
  }
  return fields;
}

double parse_number(const Field& f, std::size_t line) {
  if (f.text.empty()) throw ParseError(line, f.column, "empty field");
  double value = 0.0;
  const char* first = f.text.data();
  const char* last = first + f.text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, f.column, fmt::format("'{}' is not a number", f.text));
  }
  if (!std::isfinite(value)) throw ParseError(line, f.column, fmt::format("'{}' is not finite", f.text));
  return value;
}

template <class Cell>
CsvTable parse_table(std::string_view text, bool header, Cell cell) {
  const auto lines = split_lines(text);
  CsvTable table;
  std::size_t first = 0;
  if (header) {
    if (lines.empty()) throw ParseError(1, 1, "missing header line");
    for (const auto& f : split_fields(lines[0].second)) table.header.emplace_back(f.text);
    first = 1;
  }
  if (lines.size() <= first) throw ParseError(lines.empty() ? 1 : lines.back().first + 1, 1, "no data rows");

  const std::size_t cols = split_fields(lines[first].second).size();
  if (header && table.header.size() != cols) {
    throw ParseError(lines[first].first, 1,
                     fmt::format("row has {} fields but the header has {}", cols, table.header.size()));
  }
  const std::size_t rows = lines.size() - first;
  table.values = Matrix(rows, cols);
  table.mask.assign(rows * cols, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& [line_no, line] = lines[first + r];
    const auto fields = split_fields(line);
    if (fields.size() != cols) {
      throw ParseError(line_no, fields.back().column,
                       fmt::format("row has {} fields, expected {}", fields.size(), cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      auto [value, present] = cell(fields[c], line_no);
      table.values(r, c) = value;
      table.mask[r * cols + c] = present ? 1 : 0;
    }
  }
  return table;
}

// --- run configuration -------------------------------------------------------

class Node {
 public:
  Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& value() const { return value_; }

  [[noreturn]] void fail(const std::string& message) const { throw SchemaError(path_, message); }

  /// Object with only the listed keys.
  const Node& object(std::initializer_list<std::string_view> allowed) const {
    if (!value_.is_object()) fail("expected an object");
    for (const auto& [key, _] : value_.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) throw SchemaError(path_ + "." + key, "unknown key");
    }
    return *this;
  }

  bool has(std::string_view key) const { return value_.contains(std::string(key)); }
  Node at(std::string_view key) const {
    if (!has(key)) throw SchemaError(path_ + "." + std::string(key), "required key is missing");
    return Node(value_.at(std::string(key)), path_ + "." + std::string(key));
  }
  std::vector<Node> elements() const {
    if (!value_.is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < value_.size(); ++i) out.emplace_back(value_[i], fmt::format("{}[{}]", path_, i));
    return out;
  }

  double number() const {
    if (!value_.is_number()) fail("expected a number");
    const double v = value_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("expected a positive number");
    return v;
  }
  double nonnegative() const {
    const double v = number();
    if (!(v >= 0.0)) fail("expected a nonnegative number");
    return v;
  }
  double probability() const {
    const double v = number();
    if (!(v > 0.0 && v <= 1.0)) fail("expected a value in (0, 1]");
    return v;
  }
  std::uint64_t unsigned_int() const {
    if (!value_.is_number_unsigned()) {
      if (value_.is_number_integer() && value_.get<std::int64_t>() >= 0) return value_.get<std::uint64_t>();
      fail("expected a nonnegative integer");
    }
    return value_.get<std::uint64_t>();
  }
  std::uint64_t positive_int() const {
    const auto v = unsigned_int();
    if (v == 0) fail("expected a positive integer");
    return v;
  }
  std::string string() const {
    if (!value_.is_string()) fail("expected a string");
    return value_.get<std::string>();
  }
  bool boolean() const {
    if (!value_.is_boolean()) fail("expected true or false");
    return value_.get<bool>();
  }

 private:
  const json& value_;
  std::string path_;
};

CovarianceSpec parse_covariance(const Node& node) {
  node.object({"kind", "p", "eigenvalues", "floor", "rotation_seed", "values", "matrix"});
  const std::string kind = node.at("kind").string();
  CovarianceSpec spec;
  auto reject = [&](std::initializer_list<std::string_view> keys) {
    for (auto k : keys) {
      if (node.has(k)) throw SchemaError(node.path() + "." + std::string(k), "not allowed for kind '" + kind + "'");
    }
  };
  auto number_list = [](const Node& list, bool allow_empty) {
    std::vector<double> out;
    for (const auto& e : list.elements()) out.push_back(e.nonnegative());
    if (!allow_empty && out.empty()) list.fail("expected a non-empty array");
    return out;
  };

  if (kind == "identity") {
    reject({"eigenvalues", "floor", "rotation_seed", "values", "matrix"});
    spec.kind = CovarianceKind::kIdentity;
    spec.p = node.at("p").positive_int();
  } else if (kind == "spiked") {
    reject({"values", "matrix"});
    spec.kind = CovarianceKind::kSpiked;
    spec.p = node.at("p").positive_int();
    spec.values = number_list(node.at("eigenvalues"), false);
    if (spec.values.size() > spec.p) node.at("eigenvalues").fail("more eigenvalues than the dimension p");
    if (node.has("floor")) spec.floor = node.at("floor").nonnegative();
    if (node.has("rotation_seed")) spec.rotation_seed = RngSeed{node.at("rotation_seed").unsigned_int()};
  } else if (kind == "diagonal") {
    reject({"eigenvalues", "floor", "rotation_seed", "matrix"});
    spec.kind = CovarianceKind::kDiagonal;
    spec.values = number_list(node.at("values"), false);
    spec.p = spec.values.size();
    if (node.has("p") && node.at("p").positive_int() != spec.p) node.at("p").fail("does not match the number of values");
  } else if (kind == "explicit") {
    reject({"eigenvalues", "floor", "rotation_seed", "values"});
    spec.kind = CovarianceKind::kExplicit;
    std::vector<std::vector<double>> rows;
    for (const auto& row : node.at("matrix").elements()) {
      std::vector<double> r;
      for (const auto& e : row.elements()) r.push_back(e.number());
      rows.push_back(std::move(r));
    }
    try {
      spec.matrix = SymMatrix::from_rows_strict(rows);
    } catch (const DomainError& e) {
      node.at("matrix").fail(e.what());
    }
    spec.p = spec.matrix->dim();
    if (node.has("p") && node.at("p").positive_int() != spec.p) node.at("p").fail("does not match the matrix dimension");
  } else {
    node.at("kind").fail("expected one of identity, spiked, diagonal, explicit");
  }
  return spec;
}

EstimatorConfig parse_estimator(const Node& node) {
  node.object({"delta", "lambda", "c1", "bound_constant", "sample_size_constant"});
  EstimatorConfig cfg;
  cfg.delta_source = KnownDelta{1.0};
  if (node.has("delta")) {
    const std::string d = node.at("delta").string();
    if (d == "estimate") {
      cfg.delta_source = DeltaFromMask{};
    } else if (d != "known") {
      node.at("delta").fail("expected 'known' or 'estimate'");
    }
  }
  if (node.has("lambda")) {
    const Node lambda = node.at("lambda");
    lambda.object({"rule", "C", "value"});
    const std::string rule = lambda.at("rule").string();
    if (rule == "data_driven") {
      if (lambda.has("value")) throw SchemaError(lambda.path() + ".value", "not allowed for rule 'data_driven'");
      cfg.lambda_rule = DataDrivenLambda{lambda.has("C") ? lambda.at("C").positive() : 1.0};
    } else if (rule == "fixed") {
      if (lambda.has("C")) throw SchemaError(lambda.path() + ".C", "not allowed for rule 'fixed'");
      cfg.lambda_rule = FixedLambda{lambda.at("value").nonnegative()};
    } else {
      lambda.at("rule").fail("expected 'data_driven' or 'fixed'");
    }
  }
  if (node.has("c1")) cfg.c1 = node.at("c1").positive();
  if (node.has("bound_constant")) cfg.bound_constant = node.at("bound_constant").positive();
  if (node.has("sample_size_constant")) cfg.sample_size_constant = node.at("sample_size_constant").positive();
  return cfg;
}

VerdictSpec parse_verdicts(const Node& node) {
  node.object({"max_failure_fraction", "oracle_inequalities", "slopes"});
  VerdictSpec spec;
  if (node.has("max_failure_fraction")) {
    spec.max_failure_fraction = node.at("max_failure_fraction").nonnegative();
    if (spec.max_failure_fraction > 1.0) node.at("max_failure_fraction").fail("expected a value in [0, 1]");
  }
  if (node.has("oracle_inequalities")) spec.oracle_inequalities = node.at("oracle_inequalities").boolean();
  if (node.has("slopes")) {
    for (const auto& s : node.at("slopes").elements()) {
      s.object({"metric", "axis", "at", "min", "max"});
      SlopeCriterion c;
      c.metric = s.at("metric").string();
      if (c.metric != "frobenius_sq_error" && c.metric != "spectral_error" && c.metric != "deviation") {
        s.at("metric").fail("expected frobenius_sq_error, spectral_error or deviation");
      }
      c.axis = s.at("axis").string();
      if (c.axis != "n" && c.axis != "delta") s.at("axis").fail("expected 'n' or 'delta'");
      if (s.has("at")) c.at = s.at("at").positive();
      c.min = s.at("min").number();
      c.max = s.at("max").number();
      if (c.min > c.max) s.at("min").fail("min exceeds max");
      spec.slopes.push_back(std::move(c));
    }
  }
  return spec;
}

json summary_json(const MetricSummary& m) { return {{"mean", m.mean}, {"std_error", m.std_error}}; }

json optional_bool(const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? format_number(v) : "nan"; }

}  // namespace

CsvTable parse_matrix_csv(std::string_view text, const CsvOptions& options) {
  return parse_table(text, options.header, [&](const Field& f, std::size_t line) -> std::pair<double, bool> {
    if (options.missing_token && f.text == *options.missing_token) return {0.0, false};
    return {parse_number(f, line), true};
  });
}

CsvTable read_matrix_csv(const std::filesystem::path& path, const CsvOptions& options) {
  return parse_matrix_csv(read_text_file(path), options);
}

CsvTable parse_mask_csv(std::string_view text, bool header) {
  return parse_table(text, header, [](const Field& f, std::size_t line) -> std::pair<double, bool> {
    if (f.text == "1") return {1.0, true};
    if (f.text == "0") return {0.0, true};
    throw ParseError(line, f.column, fmt::format("mask entries must be 0 or 1, got '{}'", f.text));
  });
}

std::string format_number(double value) { return fmt::format("{:.17g}", value); }

std::string format_matrix_csv(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_number(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string format_matrix_csv(const SymMatrix& m) { return format_matrix_csv(m.to_matrix()); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(fmt::format("failed writing '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("cannot move output into '{}'", path.string()));
  }
}

RunConfig parse_run_config(const json& doc) {
  const Node root(doc, "$");
  root.object({"$schema", "seed", "threads", "covariance", "grid", "replicates", "estimator", "verdicts"});
  if (root.has("$schema") && root.at("$schema").string() != kRunConfigSchemaId) {
    root.at("$schema").fail(fmt::format("expected '{}'", kRunConfigSchemaId));
  }
  RunConfig cfg;
  auto& exp = cfg.experiment;
  exp.base_seed = RngSeed{root.at("seed").unsigned_int()};
  if (root.has("threads")) exp.threads = static_cast<unsigned>(root.at("threads").unsigned_int());
  exp.covariance = parse_covariance(root.at("covariance"));

  const Node grid = root.at("grid");
  grid.object({"n", "delta"});
  for (const auto& e : grid.at("n").elements()) exp.n_values.push_back(e.positive_int());
  if (exp.n_values.empty()) grid.at("n").fail("expected a non-empty array");
  for (const auto& e : grid.at("delta").elements()) exp.delta_values.push_back(e.probability());
  if (exp.delta_values.empty()) grid.at("delta").fail("expected a non-empty array");

  exp.replicates = root.at("replicates").positive_int();
  exp.estimator = root.has("estimator") ? parse_estimator(root.at("estimator")) : [] {
    EstimatorConfig e;
    e.delta_source = KnownDelta{1.0};
    return e;
  }();
  if (root.has("verdicts")) cfg.verdicts = parse_verdicts(root.at("verdicts"));

  try {
    exp.validate();
    build_covariance(exp.covariance);
  } catch (const DomainError& e) {
    throw SchemaError("$", e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", fmt::format("invalid JSON: {}", e.what()));
  }
  return parse_run_config(doc);
}

std::string results_csv(const ExperimentResult& result) {
  std::string out =
      "grid_index,n,delta,replicates,completed,failed,"
      "frobenius_sq_error_mean,frobenius_sq_error_se,spectral_error_mean,spectral_error_se,"
      "deviation_mean,deviation_se,lambda_mean,lambda_se,rank_hat_mean,rank_hat_se,"
      "delta_used_mean,delta_used_se,event_count,event_frequency,"
      "spectral_violations,frobenius_violations,oracle_violations\n";
  for (const auto& p : result.points) {
    out += fmt::format("{},{},{},{},{},{}", p.grid_index, p.n, format_number(p.delta), p.replicates.size(),
                       p.completed, p.failed);
    for (const MetricSummary* m :
         {&p.frobenius_sq_error, &p.spectral_error, &p.deviation, &p.lambda, &p.rank_hat, &p.delta_used}) {
      out += ',' + csv_number(m->mean) + ',' + csv_number(m->std_error);
    }
    out += fmt::format(",{},{},{},{},{}\n", p.event_count, csv_number(p.event_frequency), p.spectral_violations,
                       p.frobenius_violations, p.oracle_violations);
  }
  return out;
}

json results_json(const ExperimentResult& result) {
  json points = json::array();
  for (const auto& p : result.points) {
    json reps = json::array();
    for (const auto& r : p.replicates) {
      json rec = {{"index", r.index}, {"ok", r.ok}};
      if (r.ok) {
        rec["frobenius_sq_error"] = r.frobenius_sq_error;
        rec["spectral_error"] = r.spectral_error;
        rec["deviation"] = r.deviation;
        rec["lambda"] = r.lambda;
        rec["delta_used"] = r.delta_used;
        rec["rank_hat"] = r.rank_hat;
        rec["event"] = r.event;
        rec["spectral_ok"] = optional_bool(r.spectral_ok);
        rec["frobenius_ok"] = optional_bool(r.frobenius_ok);
        rec["oracle_ok"] = optional_bool(r.oracle_ok);
      } else {
        rec["error"] = r.error;
      }
      reps.push_back(std::move(rec));
    }
    points.push_back({{"grid_index", p.grid_index},
                      {"n", p.n},
                      {"delta", p.delta},
                      {"completed", p.completed},
                      {"failed", p.failed},
                      {"frobenius_sq_error", summary_json(p.frobenius_sq_error)},
                      {"spectral_error", summary_json(p.spectral_error)},
                      {"deviation", summary_json(p.deviation)},
                      {"lambda", summary_json(p.lambda)},
                      {"rank_hat", summary_json(p.rank_hat)},
                      {"delta_used", summary_json(p.delta_used)},
                      {"event_count", p.event_count},
                      {"event_frequency", p.event_frequency},
                      {"spectral_violations", p.spectral_violations},
                      {"frobenius_violations", p.frobenius_violations},
                      {"oracle_violations", p.oracle_violations},
                      {"replicates", std::move(reps)}});
  }
  json fits = json::array();
  for (const auto& f : result.fits) {
    fits.push_back({{"metric", f.metric},
                    {"axis", f.axis},
                    {"fixed_value", f.fixed_value},
                    {"slope", f.fit.slope},
                    {"intercept", f.fit.intercept},
                    {"half_width", f.fit.half_width}});
  }
  return {{"schema", kResultsSchemaId}, {"points", std::move(points)}, {"fits", std::move(fits)}};
}

json verdicts_json(const std::vector<Verdict>& verdicts, const ExperimentResult& result) {
  bool all = true;
  json list = json::array();
  for (const auto& v : verdicts) {
    all = all && v.passed;
    list.push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
  }
  json events = json::array();
  for (const auto& p : result.points) {
    events.push_back({{"grid_index", p.grid_index},
                      {"n", p.n},
                      {"delta", p.delta},
                      {"event_count", p.event_count},
                      {"completed", p.completed},
                      {"spectral_violations", p.spectral_violations},
                      {"frobenius_violations", p.frobenius_violations},
                      {"oracle_violations", p.oracle_violations}});
  }
  return {{"schema", kVerdictsSchemaId}, {"passed", all}, {"verdicts", std::move(list)}, {"events", std::move(events)}};
}

json calibration_json(const CoverageTable& table, double target, std::optional<double> selected,
                      const ExperimentSpec& spec) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"C", row.constant}, {"coverage", row.coverage}, {"per_point", row.per_point}});
  }
  json points = json::array();
  const std::size_t nd = spec.delta_values.size();
  for (std::size_t g = 0; g < spec.grid_size(); ++g) {
    points.push_back({{"grid_index", g}, {"n", spec.n_values[g / nd]}, {"delta", spec.delta_values[g % nd]}});
  }
  return {{"schema", kCalibrationSchemaId},
          {"target_coverage", target},
          {"selected_C", selected ? json(*selected) : json(nullptr)},
          {"failed_replicates", table.failed_replicates},
          {"grid_points", std::move(points)},
          {"table", std::move(rows)}};
}

json report_json(const EstimateReport& report, const EstimateContext& context) {
  const std::size_t p = report.sigma_tilde.dim();
  const double trace = report.sigma_tilde.trace();
  const double spectral = norm(report.sigma_tilde, NormKind::kSpectral);
  json doc = {{"schema", kEstimateReportSchemaId},
              {"n", context.n},
              {"p", p},
              {"seed", context.seed},
              {"delta_used", report.delta_used},
              {"delta_source", context.delta_estimated ? "estimated" : "known"},
              {"lambda_used", report.lambda_used},
              {"rank_hat", report.rank_hat},
              {"kept_eigenvalues", report.kept_eigenvalues},
              {"trace_tilde", trace},
              {"spectral_norm_tilde", spectral},
              {"sample_size_ok", report.sample_size_ok}};
  if (const auto* dd = std::get_if<DataDrivenLambda>(&context.lambda_rule)) {
    doc["lambda_rule"] = "data_driven";
    doc["lambda_constant"] = dd->constant;
  } else {
    doc["lambda_rule"] = "fixed";
    doc["lambda_constant"] = nullptr;
  }
  doc["effective_rank_tilde"] = report.effective_rank_tilde ? json(*report.effective_rank_tilde) : json(nullptr);

  // Plug-in envelopes at t = log(2p), i.e. confidence 1 - 1/(2p).
  const double t = std::log(2.0 * static_cast<double>(p));
  if (report.effective_rank_tilde) {
    doc["deviation_envelope"] = deviation_bound(spectral, *report.effective_rank_tilde, p, report.delta_used,
                                                context.n, t, context.bound_constant, context.c1);
    doc["trace_envelope"] =
        trace_deviation_bound(trace, report.delta_used, context.n, t, context.bound_constant, context.c1);
  } else {
    doc["deviation_envelope"] = nullptr;
    doc["trace_envelope"] = nullptr;
  }
  return doc;
}

}  // namespace mcov
