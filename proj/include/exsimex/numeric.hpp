#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace exsimex {

/// Normal density with the given variance. A zero variance is a point mass:
/// the density is 0 away from the mean (callers never ask at the mean).
double normal_pdf(double x, double mean, double var);

/// Normal distribution function. A zero variance gives the step
/// 1{x >= mean}, with 1/2 exactly at the mean.
double normal_cdf(double x, double mean, double var);

/// Physicists' Gauss-Hermite rule: sum w_k f(t_k) ~ int f(t) exp(-t^2) dt,
/// exact for polynomials of degree < 2 * size.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Shared, immutable rule for the given node count (computed once).
std::shared_ptr<const GaussHermiteRule> gauss_hermite_rule(int nodes);

/// E f(W) for W ~ N(mean, var) by Gauss-Hermite quadrature.
double gauss_hermite_expectation(const std::function<double(double)>& f, double mean, double var,
                                 int nodes);

/// Multivariate normal density.
double mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// phi(x; mu1, S1) * phi(x; mu2, S2) == mass * phi(x; mean, cov) for all x.
struct GaussianFactorization {
  double mass = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

GaussianFactorization density_product_factorize(const Eigen::VectorXd& mu1,
                                                const Eigen::MatrixXd& cov1,
                                                const Eigen::VectorXd& mu2,
                                                const Eigen::MatrixXd& cov2);

}  // namespace exsimex
