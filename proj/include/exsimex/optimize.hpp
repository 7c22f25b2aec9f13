#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string_view>

namespace exsimex {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

enum class Method { QuasiNewton, Simplex };
enum class MinimizeStatus { GradTol, StepTol, MaxIters, Infeasible };

std::string_view status_name(MinimizeStatus s);

struct MinimizeOptions {
  Method method = Method::QuasiNewton;
  int max_iters = 500;
  double grad_tol = 1e-8;
  double step_tol = 1e-10;
  /// Cap on the length of a single quasi-Newton step. Keeps the search near
  /// the local basin for targets that are only locally bounded below.
  double max_step = 1.0;
  Eigen::VectorXd start;

  void validate() const;
};

struct MinimizeResult {
  Eigen::VectorXd theta_hat;
  double value = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  MinimizeStatus status = MinimizeStatus::MaxIters;
};

/// Minimizes f from opts.start. Without a gradient callable the
/// quasi-Newton method uses central finite differences.
///
/// Quasi-Newton: BFGS inverse-Hessian update, backtracking line search with
/// Armijo constant 1e-4 and halving. Simplex: Nelder-Mead with reflection 1,
/// expansion 2, contraction 0.5, shrink 0.5, restarted once from the best
/// vertex. Accepted values never increase. A non-finite value at the start
/// returns status Infeasible.
MinimizeResult minimize(const Objective& f, const std::optional<GradientFn>& g,
                        const MinimizeOptions& opts);

/// Central differences (f(x + h_j e_j) - f(x - h_j e_j)) / (2 h_j).
/// Throws EstimationError naming the coordinate on a non-finite evaluation.
Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& steps);

}  // namespace exsimex
