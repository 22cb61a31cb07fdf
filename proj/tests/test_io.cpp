#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mcov/error.hpp"
#include "mcov/io.hpp"

using namespace mcov;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class F>
ParseError expect_parse_error(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError(0, 0, "");
}

std::string schema_path_of(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<no error>";
}

json minimal_config() {
  return json::parse(R"({
    "seed": 1,
    "covariance": {"kind": "identity", "p": 3},
    "grid": {"n": [50], "delta": [1.0]},
    "replicates": 1
  })");
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("parse_matrix_csv") {
  const auto t = parse_matrix_csv("1,2\n3, 4.5\n\n");
  REQUIRE(t.values.rows() == 2);
  REQUIRE(t.values.cols() == 2);
  CHECK(t.values(1, 1) == 4.5);
  CHECK(t.mask == std::vector<std::uint8_t>{1, 1, 1, 1});

  CsvOptions opts;
  opts.header = true;
  opts.missing_token = "NA";
  const auto h = parse_matrix_csv("a,b\r\n1,NA\r\n-2e-3,+7\r\n", opts);
  CHECK(h.header == std::vector<std::string>{"a", "b"});
  CHECK(h.values(0, 1) == 0.0);
  CHECK(h.mask == std::vector<std::uint8_t>{1, 0, 1, 1});
  CHECK(h.values(1, 0) == -2e-3);
  CHECK(h.values(1, 1) == 7.0);
}

TEST_CASE("parse_matrix_csv errors carry line and column") {
  auto e = expect_parse_error([] { parse_matrix_csv("1,2\n3,x\n"); });
  CHECK(e.line() == 2);
  CHECK(e.column() == 3);

  e = expect_parse_error([] { parse_matrix_csv("1,2\n3\n"); });
  CHECK(e.line() == 2);

  e = expect_parse_error([] { parse_matrix_csv("1,,2\n"); });
  CHECK(e.line() == 1);
  CHECK(e.column() == 3);

  e = expect_parse_error([] { parse_matrix_csv("1,inf\n"); });
  CHECK(e.column() == 3);

  // Without a missing token, NA is an ordinary malformed number.
  e = expect_parse_error([] { parse_matrix_csv("NA,1\n"); });
  CHECK(e.column() == 1);

  expect_parse_error([] { parse_matrix_csv(""); });
  CsvOptions header;
  header.header = true;
  expect_parse_error([] { parse_matrix_csv("a,b\n"); });
  expect_parse_error([&] { parse_matrix_csv("a,b\n1,2,3\n", header); });
}

TEST_CASE("matrix csv round-trip") {
  Rng rng(RngSeed{12});
  Matrix m(7, 4);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = rng.normal() * std::pow(10.0, static_cast<int>(rng.uniform() * 20) - 10);
  }
  const std::string text = format_matrix_csv(m);
  const auto back = parse_matrix_csv(text);
  CHECK(back.values == m);
  CHECK(format_matrix_csv(back.values) == text);
}

TEST_CASE("parse_mask_csv") {
  const auto m = parse_mask_csv("1,0\n0,1\n");
  CHECK(m.values(0, 1) == 0.0);
  CHECK(m.values(1, 1) == 1.0);
  const auto e = expect_parse_error([] { parse_mask_csv("1,0\n0,0.5\n"); });
  CHECK(e.line() == 2);
  CHECK(e.column() == 3);
}

TEST_CASE("parse_run_config defaults") {
  const auto cfg = parse_run_config(minimal_config());
  CHECK(cfg.experiment.covariance.p == 3);
  CHECK(cfg.experiment.replicates == 1);
  CHECK(std::holds_alternative<KnownDelta>(cfg.experiment.estimator.delta_source));
  CHECK(std::holds_alternative<DataDrivenLambda>(cfg.experiment.estimator.lambda_rule));
  CHECK(cfg.verdicts.oracle_inequalities);
  CHECK(cfg.verdicts.slopes.empty());
}

TEST_CASE("parse_run_config rejects bad documents with a path") {
  auto doc = minimal_config();
  doc["grid"]["delta"] = {0.5, 1.0, 1.5};
  CHECK(schema_path_of(doc) == "$.grid.delta[2]");

  doc = minimal_config();
  doc["bogus"] = 1;
  CHECK(schema_path_of(doc) == "$.bogus");

  doc = minimal_config();
  doc.erase("replicates");
  CHECK(schema_path_of(doc) == "$.replicates");

  doc = minimal_config();
  doc["covariance"] = {{"kind", "explicit"}, {"matrix", {{1, 2}, {3, 1}}}};
  CHECK(schema_path_of(doc) == "$.covariance.matrix");

  doc = minimal_config();
  doc["estimator"] = {{"lambda", {{"rule", "fixed"}, {"C", 1.0}}}};
  CHECK(schema_path_of(doc) == "$.estimator.lambda.C");

  doc = minimal_config();
  doc["verdicts"] = {{"slopes", {{{"metric", "frobenius_sq_error"}, {"axis", "p"}, {"min", 0}, {"max", 1}}}}};
  CHECK(schema_path_of(doc) == "$.verdicts.slopes[0].axis");

  doc = minimal_config();
  doc["$schema"] = "urn:mcov:schema:run-config:v2";
  CHECK(schema_path_of(doc) == "$.$schema");

  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("committed configs parse") {
  for (const char* name : {"acceptance.json", "event.json", "smoke.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_run_config(fs::path(MCOV_SOURCE_DIR) / "configs" / name));
  }
}

TEST_CASE("results serialization") {
  ExperimentSpec spec;
  spec.covariance.p = 3;
  spec.n_values = {50};
  spec.delta_values = {1.0};
  spec.estimator.delta_source = KnownDelta{};
  spec.estimator.lambda_rule = FixedLambda{0.0};
  spec.base_seed = RngSeed{1};
  const auto result = run_experiment(spec);

  const std::string csv = results_csv(result);
  const auto newline = csv.find('\n');
  REQUIRE(newline != std::string::npos);
  const std::string header = csv.substr(0, newline);
  CHECK(std::count(header.begin(), header.end(), ',') == 22);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  const std::string row = csv.substr(newline + 1);
  CHECK(std::count(row.begin(), row.end(), ',') == 22);
  CHECK(csv.find("nan") == std::string::npos);

  const json j = results_json(result);
  CHECK(j.at("schema") == std::string(kResultsSchemaId));
  CHECK(j.at("points").size() == 1);

  const auto verdicts = evaluate_verdicts(result, VerdictSpec{});
  const json v = verdicts_json(verdicts, result);
  CHECK(v.at("passed") == true);
}

TEST_CASE("write_file_atomic") {
  const fs::path dir = fs::temp_directory_path() / "mcov_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path file = dir / "out.txt";
  write_file_atomic(file, "first\n");
  write_file_atomic(file, "second\n");
  CHECK(read_text_file(file) == "second\n");
  CHECK_FALSE(fs::exists(dir / "out.txt.tmp"));
  CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "x.txt", "x"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("format_number round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0}) {
    CHECK(std::stod(format_number(v)) == v);
  }
}

}  // TEST_SUITE
