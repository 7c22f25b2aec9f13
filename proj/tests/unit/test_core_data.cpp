#include "exsimex/core_data.hpp"
#include "exsimex/error.hpp"
#include "exsimex/rng.hpp"

#include <doctest.h>

#include <sstream>

using namespace exsimex;

TEST_SUITE("core-data") {

TEST_CASE("three-row table with diagonal covariance") {
  std::istringstream in("y,z1,z2\n1,0.5,2\n2,1.5,-1\n3,2.5,0\n");
  ColumnMap cols;
  cols.response = "y";
  cols.covariates = {"z1", "z2"};
  const Eigen::MatrixXd sigma = Eigen::Vector2d(0.1, 0.2).asDiagonal();
  const Dataset d = load_dataset(in, cols, SigmaSource(sigma));
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.z()(1, 1) == -1.0);
  CHECK(d.y()[2] == 3.0);
  CHECK(d.sigma_u()(1, 1) == doctest::Approx(0.2));
  CHECK_FALSE(d.error_free());
}

TEST_CASE("tab-delimited input") {
  std::istringstream in("y\tz\n1\t2\n3\t4\n");
  const Table t = parse_table(in);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == 4.0);
}

TEST_CASE("non-numeric cell names its row") {
  std::istringstream in("y,z\n1,2\n3,abc\n");
  try {
    parse_table(in);
    FAIL("expected an InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("missing column") {
  std::istringstream in("y,z\n1,2\n3,4\n");
  ColumnMap cols;
  cols.response = "y";
  cols.covariates = {"w"};
  CHECK_THROWS_AS(load_dataset(in, cols, SigmaSource(Eigen::MatrixXd::Zero(1, 1))), InputError);
}

TEST_CASE("ragged row") {
  std::istringstream in("y,z\n1,2\n3\n");
  CHECK_THROWS_AS(parse_table(in), InputError);
}

TEST_CASE("dimension mismatch on construction") {
  CHECK_THROWS_AS(Dataset(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(1, 1)),
                  InputError);
  CHECK_THROWS_AS(Dataset(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(1, 1)),
                  InputError);
}

TEST_CASE("replicate columns give pairwise means and the replicate covariance") {
  std::istringstream in("y,a,b\n1,1,3\n2,2,2\n3,0,4\n4,5,1\n");
  ColumnMap cols;
  cols.response = "y";
  cols.replicates = {{"a", "b"}};
  const Dataset d = load_dataset(in, cols, SigmaSource(FromReplicates{}));
  CHECK(d.z()(0, 0) == doctest::Approx(2.0));
  CHECK(d.z()(2, 0) == doctest::Approx(2.0));
  CHECK(d.z()(3, 0) == doctest::Approx(3.0));
  // half-differences -1, 0, -2, 2
  const double mean = -0.25;
  double ss = 0.0;
  for (double v : {-1.0, 0.0, -2.0, 2.0}) ss += (v - mean) * (v - mean);
  CHECK(d.sigma_u()(0, 0) == doctest::Approx(ss / 3.0).epsilon(1e-14));
}

TEST_CASE("identical replicates give a zero covariance") {
  Rng rng(5);
  ReplicatePairs r;
  r.z1 = standard_normal_matrix(rng, 10, 2);
  r.z2 = r.z1;
  CHECK(estimate_sigma_u_from_replicates(r).norm() == 0.0);
}

TEST_CASE("half-differences -1, 0, 1 give variance 1") {
  ReplicatePairs r;
  r.z1 = Eigen::MatrixXd(3, 1);
  r.z2 = Eigen::MatrixXd(3, 1);
  r.z1 << -1, 0, 1;
  r.z2 << 1, 0, -1;
  CHECK(estimate_sigma_u_from_replicates(r)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("replicate covariance matches a brute-force pairwise oracle") {
  Rng rng(11);
  ReplicatePairs r;
  r.z1 = standard_normal_matrix(rng, 50, 2);
  r.z2 = standard_normal_matrix(rng, 50, 2);
  const Eigen::MatrixXd got = estimate_sigma_u_from_replicates(r);
  // unbiased covariance via the pairwise form sum_{i<j} (d_i - d_j)(d_i - d_j)' / (n (n - 1))
  const Eigen::MatrixXd d = (r.z1 - r.z2) / 2.0;
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < 50; ++i)
    for (int j = i + 1; j < 50; ++j) {
      const Eigen::Vector2d diff = (d.row(i) - d.row(j)).transpose();
      oracle += diff * diff.transpose();
    }
  oracle /= 50.0 * 49.0;
  CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("too few replicate rows") {
  ReplicatePairs r;
  r.z1 = Eigen::MatrixXd::Zero(1, 1);
  r.z2 = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(estimate_sigma_u_from_replicates(r), InputError);
}

TEST_CASE("slightly indefinite covariance is repaired with a warning") {
  Eigen::Matrix2d s;
  s << 1.0, 1.0, 1.0, 1.0 - 1e-12;
  const Dataset d(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Ones(2, 2), s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.sigma_u());
  CHECK(eig.eigenvalues().minCoeff() >= 0.0);
  CHECK(std::abs(eig.eigenvalues().minCoeff()) < 1e-14);
  CHECK_FALSE(d.warnings().empty());
}

TEST_CASE("clearly indefinite covariance is rejected") {
  Eigen::Matrix2d s;
  s << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(Dataset(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Ones(2, 2), s), InputError);
}

TEST_CASE("zero covariance is error free") {
  const Dataset d(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Zero(1, 1));
  CHECK(d.error_free());
  CHECK(d.warnings().empty());
}

TEST_CASE("loading is deterministic") {
  const std::string text = "y,z\n0.1,0.2\n0.3,0.7\n1e-3,-4.5\n";
  ColumnMap cols;
  cols.response = "y";
  cols.covariates = {"z"};
  std::istringstream a(text), b(text);
  const Dataset da = load_dataset(a, cols, SigmaSource(Eigen::MatrixXd::Constant(1, 1, 0.1)));
  const Dataset db = load_dataset(b, cols, SigmaSource(Eigen::MatrixXd::Constant(1, 1, 0.1)));
  CHECK(da.y() == db.y());
  CHECK(da.z() == db.z());
}

TEST_CASE("model spec validation") {
  CHECK_THROWS_AS(make_model(Family::Quantile), ConfigError);
  CHECK_THROWS_AS(make_model(Family::Quantile, 1.5), ConfigError);
  CHECK_THROWS_AS(make_model(Family::Linear, 0.5), ConfigError);
  CHECK_THROWS_AS(make_model(Family::Exponential, std::nullopt, true), ConfigError);
  CHECK_NOTHROW(make_model(Family::Expectile, 0.3, true));
  CHECK(make_model(Family::Linear, std::nullopt, true).parameter_count(2) == 3);
  CHECK(parse_family(family_name(Family::Walsh)) == Family::Walsh);
  CHECK_THROWS_AS(parse_family("probit"), ConfigError);
}

TEST_CASE("pluggable families") {
  CHECK(make_model(Family::Exponential).pluggable());
  CHECK(make_model(Family::LPRE).pluggable());
  CHECK(make_model(Family::Expectile, 0.5).pluggable());
  CHECK_FALSE(make_model(Family::Expectile, 0.3).pluggable());
  CHECK_FALSE(make_model(Family::Logistic).pluggable());
  CHECK_FALSE(make_model(Family::Quantile, 0.5).pluggable());
  CHECK_FALSE(make_model(Family::LARE).pluggable());
}

}
