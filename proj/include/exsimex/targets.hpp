#pragma once

#include "exsimex/core_data.hpp"
#include "exsimex/numeric.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>

namespace exsimex {

/// Regression parameters. For families with an intercept the flat layout
/// used by the optimizer is (intercept, coefficients...).
struct Theta {
  std::optional<double> intercept;
  Eigen::VectorXd coefficients;

  Eigen::VectorXd flat() const;
  static Theta from_flat(const Eigen::VectorXd& flat, bool has_intercept);
};

/// "alpha" for the intercept, "beta1", "beta2", ... for slopes.
std::string coordinate_name(Eigen::Index flat_index, bool has_intercept);

struct QuadratureOptions {
  int scalar_nodes = 30;  ///< 1-d integrals (logistic)
  int tensor_nodes = 15;  ///< per axis, generic least squares
};

/// Below this value of s = lambda * beta' Sigma_u beta the s = 0 closed form
/// is used instead of the Phi/phi expressions.
inline constexpr double kSmallVariance = 1e-12;
/// Exponent arguments beyond this make a target infeasible (+inf).
inline constexpr double kExpOverflow = 700.0;
/// Exact pairwise Walsh evaluation limit.
inline constexpr Eigen::Index kWalshPairCap = 5000;
/// Tensor quadrature dimension limit for generic least squares.
inline constexpr Eigen::Index kTensorDimCap = 3;

/// Everything a target needs besides theta. Holds a reference to the
/// dataset, which must outlive the context.
class TargetContext {
 public:
  TargetContext(const Dataset& data, const ModelSpec& model, double lambda,
                QuadratureOptions quad = {});

  const Dataset& data() const noexcept { return *data_; }
  const ModelSpec& model() const noexcept { return model_; }
  double lambda() const noexcept { return lambda_; }
  const QuadratureOptions& quadrature() const noexcept { return quad_; }
  Eigen::Index parameter_count() const { return model_.parameter_count(data_->p()); }

  /// alpha + Z beta for linear-index families.
  Eigen::VectorXd linear_index(const Eigen::VectorXd& theta) const;
  /// Slope block of theta (drops the intercept).
  Eigen::VectorXd slope(const Eigen::VectorXd& theta) const;
  /// s = lambda * beta' Sigma_u beta.
  double noise_variance(const Eigen::VectorXd& theta) const;

  /// Perturbation offsets and weights for tensor quadrature (generic LS).
  const Eigen::MatrixXd& tensor_offsets() const noexcept { return offsets_; }
  const Eigen::VectorXd& tensor_weights() const noexcept { return offset_weights_; }

 private:
  const Dataset* data_;
  ModelSpec model_;
  double lambda_;
  QuadratureOptions quad_;
  Eigen::MatrixXd offsets_;
  Eigen::VectorXd offset_weights_;
};

double target_linear(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_exponential(const TargetContext& ctx, const Eigen::VectorXd& theta);
Eigen::VectorXd target_exponential_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_sine(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_poisson_negloglik(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_logistic(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_lpre(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_lare(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_quantile(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_walsh(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_expectile(const TargetContext& ctx, const Eigen::VectorXd& theta);
double target_generic_ls(const TargetContext& ctx, const Eigen::VectorXd& theta);

/// Dispatch on the context's family.
double target_value(const TargetContext& ctx, const Eigen::VectorXd& theta);

/// Analytic gradient for Linear, Exponential, Poisson and LPRE; central
/// finite differences of target_value otherwise.
Eigen::VectorXd target_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta);

bool has_analytic_gradient(Family family);

/// Per-coordinate finite-difference steps max(1e-6, 1e-7 |theta_j|).
Eigen::VectorXd default_fd_steps(const Eigen::VectorXd& theta);

}  // namespace exsimex
