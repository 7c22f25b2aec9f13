#pragma once

#include "exsimex/core_data.hpp"
#include "exsimex/optimize.hpp"
#include "exsimex/targets.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exsimex {

/// Strictly increasing lambda values starting at 0.
class LambdaGrid {
 public:
  explicit LambdaGrid(std::vector<double> values);

  /// K equally spaced values on [0, upper].
  static LambdaGrid equally_spaced(double upper, int count);
  /// 21 points on [0, 2].
  static LambdaGrid standard() { return equally_spaced(2.0, 21); }
  /// 11 points on [0, 1].
  static LambdaGrid short_range() { return equally_spaced(1.0, 11); }
  /// "lo:hi:K" (lo must be 0) or a comma-separated list.
  static LambdaGrid parse(std::string_view text);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  Eigen::VectorXd as_vector() const;

 private:
  std::vector<double> values_;
};

enum class ExtrapolantKind { Linear, Quadratic, RationalLinear };

std::string_view extrapolant_name(ExtrapolantKind k);
ExtrapolantKind parse_extrapolant(std::string_view name);
/// Number of coefficients per coordinate.
int coefficient_count(ExtrapolantKind k);

struct PointDiagnostics {
  double value = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  MinimizeStatus status = MinimizeStatus::MaxIters;
};

PointDiagnostics summarize_minimization(const MinimizeResult& r);

struct GridEstimates {
  LambdaGrid grid;
  Eigen::MatrixXd thetas;  ///< K x q, row k is theta_hat(lambda_k)
  std::vector<PointDiagnostics> diagnostics;
};

/// Per-coordinate fitted trend. gamma.row(j) holds the coefficients for
/// coordinate j: (a, b) linear, (a, b, c) quadratic a + b l + c l^2, and
/// (a, b, c) rational a + b / (c + l).
struct FittedExtrapolant {
  ExtrapolantKind kind = ExtrapolantKind::Quadratic;
  Eigen::MatrixXd gamma;
  Eigen::VectorXd rss;

  double evaluate(Eigen::Index coordinate, double lambda) const;
};

enum class EstimatePath { Direct, Extrapolated };

struct EstimateResult {
  Theta theta_hat;
  EstimatePath path = EstimatePath::Direct;
  std::optional<ExtrapolantKind> kind;  ///< set on the extrapolated path
  std::optional<GridEstimates> grid;
  std::optional<FittedExtrapolant> extrapolant;
  Theta naive;
  /// Diagnostics of the lambda = -1 minimization on the direct path.
  std::optional<PointDiagnostics> direct;
};

struct EstimationOptions {
  MinimizeOptions minimize;          ///< start is optional; filled per family
  QuadratureOptions quadrature;
  bool warm_start = true;
  /// Direct path: initial lambda decrement when following the minimizer
  /// from lambda = 0 down to -1.
  double continuation_step = 0.25;
  /// A continuation step may move theta by at most
  /// branch_radius * (1 + |theta|); larger moves mean the local minimum
  /// being followed has vanished.
  double branch_radius = 0.25;
};

struct ExConfig {
  LambdaGrid grid = LambdaGrid::standard();
  ExtrapolantKind kind = ExtrapolantKind::Quadratic;
  EstimationOptions options;
  bool force_grid = false;
};

/// Family-specific starting value for the naive (lambda = 0) fit.
Eigen::VectorXd default_start(const ModelSpec& model, const Dataset& data);

/// argmin of the target at a single lambda, from the given start.
MinimizeResult minimize_target(const ModelSpec& model, const Dataset& data, double lambda,
                               const Eigen::VectorXd& start, const EstimationOptions& opts);

/// Closed-form linear estimate at any lambda:
/// beta = (S_zz + lambda Sigma_u)^{-1} S_yz with denominator-n moments,
/// alpha = ybar - beta' zbar. Throws EstimationError when the corrected
/// moment matrix is not positive definite.
Eigen::VectorXd linear_closed_form(const Dataset& data, double lambda, bool intercept);

/// Follows the local minimizer of the target from `naive` (lambda = 0) to
/// lambda = -1, halving the lambda step whenever the minimizer jumps.
/// Throws EstimationError when the branch ends before lambda = -1.
MinimizeResult continuation_minimize(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& naive,
                                     const EstimationOptions& opts);

/// Naive estimate: argmin of the lambda = 0 target.
MinimizeResult naive_fit(const ModelSpec& model, const Dataset& data, const EstimationOptions& opts);

EstimateResult direct_estimate(const ModelSpec& model, const Dataset& data,
                               const EstimationOptions& opts = {});

GridEstimates grid_estimate(const ModelSpec& model, const Dataset& data, const LambdaGrid& grid,
                            const EstimationOptions& opts = {});

FittedExtrapolant fit_extrapolant(const GridEstimates& estimates, ExtrapolantKind kind);
/// Same, from raw (lambda, theta) rows.
FittedExtrapolant fit_extrapolant(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& thetas,
                                  ExtrapolantKind kind);

Eigen::VectorXd extrapolate_to_minus_one(const FittedExtrapolant& fit);

EstimateResult ex_estimate(const ModelSpec& model, const Dataset& data, const ExConfig& config = {});

}  // namespace exsimex
