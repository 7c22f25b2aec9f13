#pragma once

#include "exsimex/extrapolate.hpp"
#include "exsimex/simex_classic.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace exsimex {

enum class OutputFormat { Csv, Json };

/// Everything an estimate run writes, in both formats.
struct EstimateReport {
  ModelSpec model;
  std::string estimator;  ///< "ex", "classical" or "naive"
  EstimateResult result;
  std::optional<SimexResult> simex;
  std::vector<std::string> warnings;
};

void write_estimate_json(std::ostream& out, const EstimateReport& report);
/// Long format: quantity,coordinate,lambda,value.
void write_estimate_csv(std::ostream& out, const EstimateReport& report, int digits = 6);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, int digits = 6);
void write_matrix_json(std::ostream& out, const Eigen::MatrixXd& m);

/// "a1,b1;a2,b2" -> column pairs.
std::vector<std::pair<std::string, std::string>> parse_replicate_spec(const std::string& text);
/// One value v -> v I, p values -> diagonal, p^2 values -> full row-major matrix.
Eigen::MatrixXd parse_sigma_u(const std::string& text, Eigen::Index p);

/// Command-line entry point. Returns the process exit status:
/// 0 success, 1 input error, 2 estimation failure, 3 configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace exsimex
