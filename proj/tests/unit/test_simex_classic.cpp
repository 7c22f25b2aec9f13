#include "exsimex/error.hpp"
#include "exsimex/simex_classic.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace exsimex;

TEST_SUITE("simex-classic") {

TEST_CASE("pseudo-data at lambda zero or without error is the original") {
  Rng rng(41);
  const Dataset d = oracle::linear_data(rng, 20, Eigen::Vector2d(1.0, 1.0), 0.3 * Eigen::MatrixXd::Identity(2, 2));
  CHECK(pseudo_data(d, 0.0, rng) == d.z());
  const Dataset clean = d.with_sigma_u(Eigen::MatrixXd::Zero(2, 2));
  for (double lambda : {0.5, 2.0}) CHECK(pseudo_data(clean, lambda, rng) == d.z());
  CHECK_THROWS_AS(pseudo_data(d, -0.1, rng), ConfigError);
}

TEST_CASE("pseudo-data noise has covariance lambda Sigma_u") {
  Rng rng(42);
  Eigen::Matrix2d s;
  s << 0.4, 0.1, 0.1, 0.2;
  const Dataset d(Eigen::VectorXd::Zero(200000), Eigen::MatrixXd::Zero(200000, 2), s);
  const double lambda = 1.5;
  const Eigen::MatrixXd w = pseudo_data(d, lambda, rng);
  const Eigen::MatrixXd cov = w.transpose() * w / static_cast<double>(w.rows());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double target = lambda * s(i, j);
      // standard error of a sample second moment of a bivariate normal
      const double se = std::sqrt((lambda * s(i, i) * lambda * s(j, j) + target * target) / w.rows());
      CHECK(std::abs(cov(i, j) - target) < 3.0 * se);
    }
}

TEST_CASE("zero covariance returns the naive estimate exactly") {
  Rng rng(43);
  const Dataset d = fixture::family_data(Family::Exponential, rng, 80, 1, 0.0);
  SimexConfig cfg;
  cfg.b = 5;
  const SimexResult r = classical_simex(make_model(Family::Exponential), d, cfg);
  CHECK(r.estimate.theta_hat.flat() == r.estimate.naive.flat());
}

TEST_CASE("fixed seed gives identical results regardless of workers") {
  Rng rng(44);
  const Dataset d = oracle::linear_data(rng, 100, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.3));
  SimexConfig cfg;
  cfg.b = 20;
  cfg.grid = LambdaGrid::short_range();
  cfg.seed = 99;
  cfg.workers = 1;
  const SimexResult a = classical_simex(make_model(Family::Linear), d, cfg);
  cfg.workers = 3;
  const SimexResult b = classical_simex(make_model(Family::Linear), d, cfg);
  CHECK(a.tbar == b.tbar);
  CHECK(a.estimate.theta_hat.flat() == b.estimate.theta_hat.flat());
  cfg.seed = 100;
  const SimexResult c = classical_simex(make_model(Family::Linear), d, cfg);
  CHECK(a.tbar(3, 0) != c.tbar(3, 0));
}

TEST_CASE("first grid row is the naive fit and the trend is attenuating") {
  Rng rng(45);
  const Dataset d = oracle::linear_data(rng, 300, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.3));
  SimexConfig cfg;
  cfg.b = 50;
  const SimexResult r = classical_simex(make_model(Family::Linear), d, cfg);
  CHECK(r.tbar(0, 0) == r.estimate.naive.coefficients[0]);
  CHECK(r.tbar_se(0, 0) == 0.0);
  CHECK(r.tbar(20, 0) < r.tbar(10, 0));
  CHECK(r.tbar(10, 0) < r.tbar(0, 0));
  REQUIRE(r.estimate.grid);
  REQUIRE(r.estimate.extrapolant);
  CHECK(r.theta_se[0] > 0.0);
}

TEST_CASE("configuration checks") {
  SimexConfig cfg;
  cfg.b = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.b = 10;
  cfg.grid = LambdaGrid({0.0, 1.0});
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.kind = ExtrapolantKind::Linear;
  CHECK_NOTHROW(cfg.validate());
}

}
