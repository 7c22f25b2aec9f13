#include "exsimex/numeric.hpp"

#include "exsimex/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace exsimex {

double normal_pdf(double x, double mean, double var) {
  if (var < 0.0) throw ConfigError("normal_pdf: negative variance");
  if (var == 0.0) return x == mean ? std::numeric_limits<double>::infinity() : 0.0;
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_cdf(double x, double mean, double var) {
  if (var < 0.0) throw ConfigError("normal_cdf: negative variance");
  if (var == 0.0) return x > mean ? 1.0 : (x < mean ? 0.0 : 0.5);
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

namespace {

// Newton iteration on the orthonormal Hermite recurrence, with the usual
// asymptotic initial guesses for the largest roots.
GaussHermiteRule compute_rule(int n) {
  GaussHermiteRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * rule.nodes[1];
    else
      z = 2.0 * z - rule.nodes[static_cast<std::size_t>(i - 2)];
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = z;
    rule.nodes[hi] = -z;
    rule.weights[lo] = 2.0 / (pp * pp);
    rule.weights[hi] = rule.weights[lo];
  }
  return rule;
}

}  // namespace

std::shared_ptr<const GaussHermiteRule> gauss_hermite_rule(int nodes) {
  if (nodes < 2) throw ConfigError("Gauss-Hermite quadrature needs at least 2 nodes");
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const GaussHermiteRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[nodes];
  if (!slot) slot = std::make_shared<const GaussHermiteRule>(compute_rule(nodes));
  return slot;
}

double gauss_hermite_expectation(const std::function<double(double)>& f, double mean, double var,
                                 int nodes) {
  if (!(var > 0.0)) throw ConfigError("gauss_hermite_expectation: variance must be positive");
  const auto rule = gauss_hermite_rule(nodes);
  const double scale = std::sqrt(2.0 * var);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule->nodes.size(); ++k)
    acc += rule->weights[k] * f(mean + scale * rule->nodes[k]);
  return acc / std::sqrt(std::numbers::pi);
}

double mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw EstimationError("mvn_pdf: covariance is not positive definite");
  const Eigen::VectorXd w = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const auto p = static_cast<double>(x.size());
  return std::exp(-0.5 * w.squaredNorm() - 0.5 * logdet - 0.5 * p * std::log(2.0 * std::numbers::pi));
}

GaussianFactorization density_product_factorize(const Eigen::VectorXd& mu1,
                                                const Eigen::MatrixXd& cov1,
                                                const Eigen::VectorXd& mu2,
                                                const Eigen::MatrixXd& cov2) {
  const Eigen::Index p = mu1.size();
  if (mu2.size() != p || cov1.rows() != p || cov1.cols() != p || cov2.rows() != p || cov2.cols() != p)
    throw ConfigError("density_product_factorize: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> l1(cov1), l2(cov2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success)
    throw EstimationError("density_product_factorize: covariance is singular or indefinite");
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd prec = l1.solve(id) + l2.solve(id);
  Eigen::LLT<Eigen::MatrixXd> lp(prec);
  GaussianFactorization out;
  out.cov = lp.solve(id);
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.mean = out.cov * (l1.solve(mu1) + l2.solve(mu2));
  out.mass = mvn_pdf(mu1, mu2, cov1 + cov2);
  return out;
}

}  // namespace exsimex
