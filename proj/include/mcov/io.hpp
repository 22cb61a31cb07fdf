/**
 * @file io.hpp
 * @brief Matrix/mask CSV files, run configuration documents and result serialization.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcov/estimator.hpp"
#include "mcov/experiments.hpp"
#include "mcov/linalg.hpp"

namespace mcov {

inline constexpr std::string_view kRunConfigSchemaId = "urn:mcov:schema:run-config:v1";
inline constexpr std::string_view kEstimateReportSchemaId = "urn:mcov:schema:estimate-report:v1";
inline constexpr std::string_view kResultsSchemaId = "urn:mcov:schema:results:v1";
inline constexpr std::string_view kVerdictsSchemaId = "urn:mcov:schema:verdicts:v1";
inline constexpr std::string_view kCalibrationSchemaId = "urn:mcov:schema:calibration:v1";

struct CsvOptions {
  bool header = false;
  /// Fields equal to this token become (value 0, mask 0).
  std::optional<std::string> missing_token;
};

struct CsvTable {
  Matrix values;
  std::vector<std::uint8_t> mask;  // row-major, 1 = present
  std::vector<std::string> header;
};

/// Throws ParseError with 1-based line and column on malformed input.
CsvTable parse_matrix_csv(std::string_view text, const CsvOptions& options = {});
CsvTable read_matrix_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// 0/1 mask file; any other value is a parse error.
CsvTable parse_mask_csv(std::string_view text, bool header = false);

/// Shortest-round-trip-safe decimal (17 significant digits).
std::string format_number(double value);
std::string format_matrix_csv(const Matrix& m);
std::string format_matrix_csv(const SymMatrix& m);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct RunConfig {
  ExperimentSpec experiment;
  VerdictSpec verdicts;
};

/// Validates and converts a run configuration. Unknown keys are rejected;
/// SchemaError::path() names the offending location, e.g. "$.grid.delta[2]".
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

std::string results_csv(const ExperimentResult& result);
nlohmann::json results_json(const ExperimentResult& result);
nlohmann::json verdicts_json(const std::vector<Verdict>& verdicts, const ExperimentResult& result);
nlohmann::json calibration_json(const CoverageTable& table, double target, std::optional<double> selected,
                                const ExperimentSpec& spec);

struct EstimateContext {
  std::uint64_t seed = 0;
  bool delta_estimated = false;
  LambdaRule lambda_rule;
  double bound_constant = 1.0;
  double c1 = 1.0;
  std::size_t n = 0;
};

/// Summary of an estimate without the matrices (those go to CSV).
nlohmann::json report_json(const EstimateReport& report, const EstimateContext& context);

}  // namespace mcov
