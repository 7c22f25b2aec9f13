#pragma once

#include "exsimex/core_data.hpp"
#include "exsimex/extrapolate.hpp"
#include "exsimex/rng.hpp"
#include "exsimex/simex_classic.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exsimex {

enum class ErrorLaw { Normal, Laplace };
enum class NoiseLaw { StandardNormal, ChiSquare2 };
enum class Estimator { Ex, Classical, Naive };

std::string_view error_law_name(ErrorLaw law);
std::string_view noise_law_name(NoiseLaw law);
std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);

/// One simulation design cell.
struct Scenario {
  std::string label;
  ModelSpec model;
  Eigen::VectorXd theta0;   ///< flat layout (intercept first when present)
  int n = 200;
  Eigen::MatrixXd x_cov;    ///< covariance of the normal covariate X (mean 0)
  Eigen::MatrixXd sigma_u;  ///< nominal measurement error covariance
  ErrorLaw u_law = ErrorLaw::Normal;
  NoiseLaw eps_law = NoiseLaw::StandardNormal;
  /// Regression error scale. For LPRE/LARE the multiplicative error is
  /// exp(eps_scale * N(0, 1)).
  double eps_scale = 1.0;
  Estimator estimator = Estimator::Ex;
  ExConfig ex;
  SimexConfig simex;

  Eigen::Index p() const { return x_cov.rows(); }
  void validate() const;
};

struct SimulatedData {
  Dataset data;
  Eigen::MatrixXd x;  ///< latent covariates
  Eigen::VectorXd theta0;
};

/// Draws X, U and the regression error, then Y through the family's
/// data-generating mechanism. The dataset carries the nominal Sigma_u.
SimulatedData simulate_dataset(const Scenario& scenario, Rng& rng);

/// Regression error draw per the scenario's law (mean/median 0, variance 1
/// before scaling).
double draw_noise(NoiseLaw law, Rng& rng);

/// Per-coordinate Monte Carlo summary (variance uses denominator R).
struct SummaryRow {
  Eigen::VectorXd mean;
  Eigen::VectorXd bias;
  Eigen::VectorXd variance;
  Eigen::VectorXd mse;
};

SummaryRow summarize(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& theta0);

/// Runs the scenario's estimator on one dataset. Throws on failure.
Eigen::VectorXd run_estimator(const Scenario& scenario, const Dataset& data, std::uint64_t stream_seed);

struct CellResult {
  std::string label;
  int n = 0;
  double sigma_u2 = 0.0;     ///< Sigma_u(0, 0)
  Eigen::VectorXd theta0;
  SummaryRow summary;
  int replications = 0;      ///< requested
  int failures = 0;
  bool failed = false;       ///< more than 5% of replications failed
  std::string first_failure;
  double seconds = 0.0;      ///< wall clock, not part of rendered tables
  /// Per replication, empty when that replication failed.
  std::vector<std::optional<Eigen::VectorXd>> estimates;
};

struct StudyTable {
  std::string name;
  std::vector<CellResult> cells;
};

struct StudyOptions {
  int replications = 500;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  double max_failure_fraction = 0.05;
};

/// Replication r of cell c uses stream (seed, c, r) for its data. Two studies
/// with the same seed and cell order therefore see identical datasets.
StudyTable run_study(const std::string& name, const std::vector<Scenario>& cells, const StudyOptions& options);

// Presets.

/// Univariate exponential, theta0 = 1, sigma_u^2 in {0.5, 0.25, 0.1},
/// n in {200, 300, 500, 800}; cells ordered by n then decreasing sigma_u^2.
std::vector<Scenario> table1_cells(Estimator estimator = Estimator::Ex);
/// Bivariate exponential, theta0 = (0.5, 1), Sigma_u = s^2 [[1, .5], [.5, 1]],
/// s^2 in {0.25, 0.2, 0.1}, same n values.
std::vector<Scenario> table23_cells(Estimator estimator = Estimator::Ex);
Scenario exponential_scenario(int n, double sigma_u2);
Scenario bivariate_exponential_scenario(int n, double sigma2);

// Quantile lines.

struct QuantileScenario {
  int n = 500;
  double sigma_u = 0.5;  ///< standard deviation of U
  NoiseLaw eps_law = NoiseLaw::StandardNormal;
  double beta0 = 1.0;
  double beta1 = 1.0;
  LambdaGrid grid = LambdaGrid::standard();
  ExtrapolantKind kind = ExtrapolantKind::Quadratic;

  std::string label() const;
};

inline const std::vector<double> kQuantileLevels{0.1, 0.25, 0.5, 0.75, 0.9};

struct QuantileLine {
  double tau = 0.5;
  std::string estimator;  ///< "ex", "oracle", "naive"
  double intercept = 0.0; ///< averaged over successful replications
  double slope = 0.0;
};

struct QuantileLevelSummary {
  double tau = 0.5;
  int successes = 0;
  int failures = 0;
  double ex_closer_fraction = 0.0;  ///< |slope_ex - slope_oracle| < |slope_naive - slope_oracle|
  double ex_distance = 0.0;         ///< mean of max(|d intercept|, |d slope|), EX vs oracle
  double naive_distance = 0.0;
};

struct QuantileReport {
  QuantileScenario scenario;
  int replications = 0;
  std::vector<QuantileLine> lines;  ///< 3 estimators per level
  std::vector<QuantileLevelSummary> levels;
};

QuantileReport quantile_lines_study(const QuantileScenario& scenario, const std::vector<double>& taus,
                                    int replications, std::uint64_t seed, unsigned workers = 0);

std::vector<QuantileScenario> quantile_preset();

// Misspecification.

struct MisspecOptions {
  std::vector<int> sizes{2000, 8000};
  int replications = 200;
  int seeds = 5;
  double theta0 = 1.0;
  double sigma_x2 = 0.5;
  double sigma_u2 = 0.5;
  unsigned workers = 0;
};

struct MisspecRow {
  std::string error_law;  ///< "laplace" or "normal"
  int n = 0;
  double bias = 0.0;      ///< averaged over the seed battery
  std::vector<double> seed_bias;
  int failures = 0;
};

struct MisspecReport {
  MisspecOptions options;
  std::vector<MisspecRow> rows;

  const MisspecRow& row(std::string_view law, int n) const;
};

/// Poisson regression with Laplace measurement error, estimated assuming
/// normal error, against the normal-error control.
MisspecReport misspecification_study(std::uint64_t seed, const MisspecOptions& options = {});

Scenario poisson_misspec_scenario(int n, ErrorLaw law, const MisspecOptions& options);

// Output.

/// Long-format CSV: cell,n,sigma_u2,coordinate,theta0,mean,bias,variance,mse,replications,failures.
void write_study_csv(std::ostream& out, const StudyTable& table, int digits = 6);
void write_study_json(std::ostream& out, const StudyTable& table);
/// Reads what write_study_json wrote (estimates are not stored).
StudyTable read_study_json(std::istream& in);
/// Mean/Bias/Variance/MSE rows with one column per cell and coordinate.
void write_paper_table(std::ostream& out, const StudyTable& table, int decimals = 3);

void write_quantile_csv(std::ostream& out, const std::vector<QuantileReport>& reports, int digits = 6);
void write_quantile_json(std::ostream& out, const std::vector<QuantileReport>& reports);
void write_misspec_csv(std::ostream& out, const MisspecReport& report, int digits = 6);
void write_misspec_json(std::ostream& out, const MisspecReport& report);

/// printf-style %.{digits}g.
std::string format_number(double v, int digits);

}  // namespace exsimex
