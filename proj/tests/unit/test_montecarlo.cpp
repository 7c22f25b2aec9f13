#include "exsimex/error.hpp"
#include "exsimex/montecarlo.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace exsimex;

TEST_SUITE("montecarlo") {

TEST_CASE("summary hand arithmetic") {
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);
  const SummaryRow same = summarize({one, one, one}, one);
  CHECK(same.bias[0] == 0.0);
  CHECK(same.variance[0] == 0.0);
  CHECK(same.mse[0] == 0.0);
  const SummaryRow s = summarize({Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0)}, one);
  CHECK(s.mean[0] == 1.0);
  CHECK(s.bias[0] == 0.0);
  CHECK(s.variance[0] == 1.0);
  CHECK(s.mse[0] == 1.0);
}

TEST_CASE("mse is squared bias plus variance") {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::VectorXd> est;
    for (int r = 0; r < 37; ++r) est.push_back(standard_normal_matrix(rng, 3, 1) * 2.0 + Eigen::VectorXd::Constant(3, 0.5));
    const Eigen::VectorXd theta0 = standard_normal_matrix(rng, 3, 1);
    const SummaryRow s = summarize(est, theta0);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(s.mse[j] - (s.bias[j] * s.bias[j] + s.variance[j])) < 1e-12);
  }
}

TEST_CASE("simulated surrogates have covariance cov(X) + Sigma_u") {
  Scenario sc = bivariate_exponential_scenario(100000, 0.2);
  Rng rng(52);
  const SimulatedData sim = simulate_dataset(sc, rng);
  const Eigen::MatrixXd& z = sim.data.z();
  const Eigen::MatrixXd target = sc.x_cov + sc.sigma_u;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd c = z.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(z.rows() - 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / z.rows());
      CHECK(std::abs(cov(i, j) - target(i, j)) < 3.0 * se);
    }
  CHECK(sim.data.sigma_u() == sc.sigma_u);
}

TEST_CASE("zero measurement error gives Z equal to X") {
  Scenario sc = exponential_scenario(50, 0.0);
  Rng rng(53);
  const SimulatedData sim = simulate_dataset(sc, rng);
  CHECK(sim.data.z() == sim.x);
}

TEST_CASE("Laplace errors are variance matched") {
  MisspecOptions mo;
  Scenario sc = poisson_misspec_scenario(200000, ErrorLaw::Laplace, mo);
  Rng rng(54);
  const SimulatedData sim = simulate_dataset(sc, rng);
  const Eigen::VectorXd u = sim.data.z().col(0) - sim.x.col(0);
  const double var = u.squaredNorm() / u.size();
  // Laplace fourth moment is 6 var^2, so var(u^2) = 5 var^2
  const double se = std::sqrt(5.0) * mo.sigma_u2 / std::sqrt(static_cast<double>(u.size()));
  CHECK(std::abs(var - mo.sigma_u2) < 3.0 * se);
  const double kurt = u.array().pow(4).mean() / (var * var);
  CHECK(kurt > 5.0);
}

TEST_CASE("centred chi-square noise has median zero and unit variance") {
  Rng rng(55);
  std::vector<double> v(200001);
  for (double& x : v) x = draw_noise(NoiseLaw::ChiSquare2, rng);
  double m2 = 0.0;
  for (double x : v) m2 += x * x;
  std::nth_element(v.begin(), v.begin() + 100000, v.end());
  CHECK(std::abs(v[100000]) < 0.01);
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= v.size();
  CHECK(std::abs(m2 / v.size() - mu * mu - 1.0) < 0.03);
}

TEST_CASE("studies are deterministic under a fixed seed") {
  std::vector<Scenario> cells{exponential_scenario(100, 0.1), exponential_scenario(150, 0.25)};
  StudyOptions o;
  o.replications = 12;
  o.seed = 77;
  o.workers = 1;
  const StudyTable a = run_study("t", cells, o);
  o.workers = 4;
  const StudyTable b = run_study("t", cells, o);
  std::ostringstream ja, jb;
  write_study_json(ja, a);
  write_study_json(jb, b);
  CHECK(ja.str() == jb.str());
  o.seed = 78;
  std::ostringstream jc;
  write_study_json(jc, run_study("t", cells, o));
  CHECK(ja.str() != jc.str());
}

TEST_CASE("EX equals naive per replication without measurement error") {
  Scenario sc = exponential_scenario(120, 0.0);
  StudyOptions o;
  o.replications = 10;
  o.seed = 5;
  const StudyTable ex = run_study("ex", {sc}, o);
  sc.estimator = Estimator::Naive;
  const StudyTable naive = run_study("naive", {sc}, o);
  for (int r = 0; r < 10; ++r) {
    REQUIRE(ex.cells[0].estimates[r]);
    REQUIRE(naive.cells[0].estimates[r]);
    CHECK(*ex.cells[0].estimates[r] == *naive.cells[0].estimates[r]);
  }
  CHECK(ex.cells[0].summary.bias == naive.cells[0].summary.bias);
}

TEST_CASE("study JSON round trip") {
  StudyOptions o;
  o.replications = 6;
  const StudyTable t = run_study("rt", {bivariate_exponential_scenario(120, 0.1)}, o);
  std::ostringstream out;
  write_study_json(out, t);
  std::istringstream in(out.str());
  const StudyTable back = read_study_json(in);
  std::ostringstream again;
  write_study_json(again, back);
  CHECK(out.str() == again.str());
  REQUIRE(back.cells.size() == 1);
  CHECK(back.cells[0].summary.mse == t.cells[0].summary.mse);
}

TEST_CASE("table presets have the study layout") {
  const auto t1 = table1_cells();
  CHECK(t1.size() == 12);
  CHECK(t1.front().n == 200);
  CHECK(t1.front().sigma_u(0, 0) == 0.5);
  CHECK(t1.back().n == 800);
  CHECK(t1.back().sigma_u(0, 0) == 0.1);
  const auto t23 = table23_cells();
  CHECK(t23.size() == 12);
  CHECK(t23[0].sigma_u(0, 1) == doctest::Approx(0.5 * t23[0].sigma_u(0, 0)));
  CHECK(t23[0].theta0 == Eigen::Vector2d(0.5, 1.0));
  CHECK(quantile_preset().size() == 8);
}

TEST_CASE("failed replications are counted and fail the cell") {
  // error variance above the covariate variance: most datasets have no
  // corrected minimum continuing the naive fit
  Scenario sc = exponential_scenario(200, 1.5);
  StudyOptions o;
  o.replications = 10;
  const StudyTable t = run_study("bad", {sc}, o);
  const CellResult& c = t.cells[0];
  CHECK(c.failures > 0);
  CHECK(c.failed);
  CHECK(c.first_failure.find("lambda") != std::string::npos);
  int empty = 0;
  for (const auto& e : c.estimates) empty += e ? 0 : 1;
  CHECK(empty == c.failures);
}

TEST_CASE("invalid scenarios") {
  Scenario sc = exponential_scenario(100, 0.2);
  sc.theta0 = Eigen::Vector2d(1.0, 1.0);
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  Scenario lap = bivariate_exponential_scenario(100, 0.2);
  lap.u_law = ErrorLaw::Laplace;
  CHECK_THROWS_AS(lap.validate(), ConfigError);
  CHECK_THROWS_AS(parse_estimator("bootstrap"), ConfigError);
}

TEST_CASE("quantile lines: symmetric error gives an unbiased median intercept") {
  QuantileScenario qs;
  qs.n = 300;
  qs.sigma_u = 0.1;
  const QuantileReport r = quantile_lines_study(qs, {0.5}, 40, 3);
  REQUIRE(r.levels.size() == 1);
  CHECK(r.levels[0].failures == 0);
  for (const QuantileLine& l : r.lines)
    if (l.estimator == "ex") CHECK(std::abs(l.intercept - qs.beta0) < 0.05);
}

TEST_CASE("format_number") {
  CHECK(format_number(0.125, 3) == "0.125");
  CHECK(format_number(1.0 / 3.0, 4) == "0.3333");
}

}
