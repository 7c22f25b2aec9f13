#pragma once

#include "exsimex/core_data.hpp"
#include "exsimex/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace fixture {

// Small dataset whose responses lie in the support of the family.
inline exsimex::Dataset family_data(exsimex::Family family, exsimex::Rng& rng, Eigen::Index n, Eigen::Index p,
                                    double su2 = 0.3) {
  using exsimex::Family;
  const Eigen::MatrixXd z = exsimex::standard_normal_matrix(rng, n, p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p) * su2;
  if (p > 1) sigma(0, 1) = sigma(1, 0) = 0.3 * su2;
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 0.6 * z.row(i).sum();
    switch (family) {
      case Family::Poisson: {
        std::poisson_distribution<int> pd(std::exp(h));
        y[i] = pd(rng);
        break;
      }
      case Family::Logistic: y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-h)) ? 1.0 : 0.0; break;
      case Family::LPRE:
      case Family::LARE: y[i] = std::exp(h + 0.5 * nd(rng)); break;
      case Family::Exponential: y[i] = std::exp(h) + 0.5 * nd(rng); break;
      case Family::Sine: y[i] = std::sin(h) + 0.3 * nd(rng); break;
      default: y[i] = h + nd(rng); break;
    }
  }
  return exsimex::Dataset(y, z, sigma);
}

inline Eigen::VectorXd random_theta(exsimex::Rng& rng, Eigen::Index q, double scale = 0.6) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::VectorXd t(q);
  for (Eigen::Index j = 0; j < q; ++j) t[j] = unif(rng);
  return t;
}

}  // namespace fixture
