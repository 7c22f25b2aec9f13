#pragma once

#include "exsimex/core_data.hpp"
#include "exsimex/extrapolate.hpp"
#include "exsimex/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace exsimex {

struct SimexConfig {
  int b = 100;
  LambdaGrid grid = LambdaGrid::standard();
  ExtrapolantKind kind = ExtrapolantKind::Quadratic;
  std::uint64_t seed = 1;
  EstimationOptions naive_options;
  unsigned workers = 0;  ///< 0 = hardware concurrency

  void validate() const;
};

struct SimexResult {
  EstimateResult estimate;
  Eigen::MatrixXd tbar;     ///< K x q averages over the B pseudo-data fits
  Eigen::MatrixXd tbar_se;  ///< K x q Monte Carlo standard errors of tbar
  /// Monte Carlo standard error of the extrapolated value (delta method
  /// through the extrapolant fit; grid points use independent streams).
  Eigen::VectorXd theta_se;
};

/// Z + sqrt(lambda) V with rows V_i ~ N(0, Sigma_u).
Eigen::MatrixXd pseudo_data(const Dataset& data, double lambda, Rng& rng);

/// Simulation-extrapolation with B pseudo-data sets per grid point. The
/// pseudo-data for (grid point k, replicate b) come from stream (seed, k, b).
SimexResult classical_simex(const ModelSpec& model, const Dataset& data, const SimexConfig& config);

}  // namespace exsimex
