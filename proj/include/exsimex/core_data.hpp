#pragma once

#include <Eigen/Dense>

#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace exsimex {

/// Observed sample: responses y, surrogates z = x + u (one row per
/// observation) and the known measurement-error covariance.
///
/// Construction validates shapes and finiteness and repairs a slightly
/// indefinite covariance: it is symmetrized, eigenvalues below
/// -1e-10 * trace are rejected, and the remaining negative ones are clamped
/// to zero. Any repair is recorded in warnings().
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::MatrixXd z, Eigen::MatrixXd sigma_u);

  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Eigen::MatrixXd& z() const noexcept { return z_; }
  const Eigen::MatrixXd& sigma_u() const noexcept { return sigma_u_; }
  Eigen::Index n() const noexcept { return y_.size(); }
  Eigen::Index p() const noexcept { return z_.cols(); }
  bool error_free() const noexcept { return error_free_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Same responses and covariance, different surrogate matrix.
  Dataset with_surrogates(Eigen::MatrixXd z) const;
  /// Same responses and surrogates, different covariance.
  Dataset with_sigma_u(Eigen::MatrixXd sigma_u) const;

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd z_;
  Eigen::MatrixXd sigma_u_;
  bool error_free_ = false;
  std::vector<std::string> warnings_;
};

/// Two independent surrogate measurements per subject.
struct ReplicatePairs {
  Eigen::MatrixXd z1;
  Eigen::MatrixXd z2;

  void validate() const;
  /// Per-row average (z1 + z2) / 2.
  Eigen::MatrixXd mean() const;
};

/// Sample covariance (denominator n - 1) of the half-differences
/// (z1 - z2) / 2. Throws InputError for fewer than two rows.
Eigen::MatrixXd estimate_sigma_u_from_replicates(const ReplicatePairs& reps);

/// Symmetrize and clamp negative eigenvalues. Returns the repaired matrix and
/// whether anything beyond rounding-level symmetrization changed.
std::pair<Eigen::MatrixXd, bool> repair_psd(const Eigen::MatrixXd& a);

enum class Family {
  Linear,
  Exponential,
  Sine,
  Poisson,
  Logistic,
  LPRE,
  LARE,
  Quantile,
  Walsh,
  Expectile,
  GenericLS,
};

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

/// User-supplied regression function m(x; theta) for least-squares targets.
struct MeanFunction {
  std::string name;
  Eigen::Index p = 1;  ///< covariate dimension it expects
  Eigen::Index q = 1;  ///< number of parameters
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& theta)>
      value;
  /// Optional data-driven starting value for the naive fit.
  std::function<Eigen::VectorXd(const Dataset&)> default_start;
};

/// Built-in mean functions: "linear", "exponential", "sshape". The S-shaped
/// curve is b0 + b1 / (1 + exp(b2 (x - b3))) for scalar x.
MeanFunction builtin_mean_function(std::string_view name, Eigen::Index p = 1);

struct ModelSpec {
  Family family = Family::Linear;
  std::optional<double> tau;
  bool intercept = false;
  std::optional<MeanFunction> mean_fn;

  /// Throws ConfigError when the field combination is invalid.
  void validate() const;

  /// Number of free parameters for covariate dimension p.
  Eigen::Index parameter_count(Eigen::Index p) const;

  /// Families whose target is a function of a linear index alpha + z'beta with
  /// the noise entering through s = lambda * beta' Sigma_u beta.
  bool linear_index() const { return family != Family::GenericLS; }

  /// Families whose conditional-expectation target stays defined at lambda = -1.
  bool pluggable() const;

  /// Families whose lambda = 0 target is non-smooth in theta.
  bool nonsmooth_at_zero() const;
};

ModelSpec make_model(Family family, std::optional<double> tau = std::nullopt,
                     bool intercept = false);

/// Where the covariance comes from when loading a table.
struct FromReplicates {};
using SigmaSource = std::variant<Eigen::MatrixXd, FromReplicates>;

struct ColumnMap {
  std::string response;
  std::vector<std::string> covariates;
  /// (first, second) replicate column names, one pair per covariate.
  std::vector<std::pair<std::string, std::string>> replicates;
};

/// Raw delimited numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

/// Parses a comma- or tab-delimited table (delimiter detected from the header
/// line). Errors name the data row (1-based) and column.
Table parse_table(std::istream& in);

Dataset load_dataset(std::istream& in, const ColumnMap& columns,
                     const SigmaSource& sigma);

/// Replicate columns of an already parsed table.
ReplicatePairs replicate_pairs(const Table& table,
                               const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace exsimex
