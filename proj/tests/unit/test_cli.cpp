#include "exsimex/cli.hpp"
#include "exsimex/core_data.hpp"
#include "exsimex/montecarlo.hpp"
#include "exsimex/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace exsimex;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "exsimex");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / ("exsimex_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path.string();
}

std::string to_csv(const Eigen::VectorXd& y, const Eigen::MatrixXd& z) {
  std::ostringstream s;
  s.precision(17);
  s << "y";
  for (Eigen::Index j = 0; j < z.cols(); ++j) s << ",z" << j + 1;
  s << '\n';
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    s << y[i];
    for (Eigen::Index j = 0; j < z.cols(); ++j) s << ',' << z(i, j);
    s << '\n';
  }
  return s.str();
}

std::vector<double> as_vector(const json& j) { return j.get<std::vector<double>>(); }

// CSV rows keyed by quantity|coordinate|lambda.
std::map<std::string, double> csv_values(const std::string& text) {
  std::map<std::string, double> m;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    m[line.substr(0, c3)] = std::stod(line.substr(c3 + 1));
  }
  return m;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("linear estimate matches the corrected least-squares oracle") {
  Rng rng(61);
  const Eigen::MatrixXd su = 0.2 * Eigen::MatrixXd::Identity(2, 2);
  const Dataset d = oracle::linear_data(rng, 150, Eigen::Vector2d(1.0, -0.5), su);
  const std::string in = write_file("lin.csv", to_csv(d.y(), d.z()));
  const Run r = cli({"estimate", "--model", "linear", "--input", in, "--sigma-u", "0.2"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["path"] == "direct");
  const auto theta = as_vector(j["theta_hat"]);
  const Eigen::VectorXd want = oracle::corrected_least_squares(d, -1.0, false);
  CHECK(std::abs(theta[0] - want[0]) < 1e-10);
  CHECK(std::abs(theta[1] - want[1]) < 1e-10);
  CHECK(j["coordinates"][1] == "beta2");
}

TEST_CASE("zero covariance returns the naive estimate") {
  Rng rng(62);
  Eigen::VectorXd y(60);
  const Eigen::MatrixXd z = standard_normal_matrix(rng, 60, 1);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (int i = 0; i < 60; ++i) y[i] = std::exp(0.8 * z(i, 0)) + nd(rng);
  const std::string in = write_file("exp0.csv", to_csv(y, z));
  for (const char* model : {"linear", "exponential"}) {
    const Run r = cli({"estimate", "--model", model, "--input", in, "--sigma-u", "0"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["theta_hat"] == j["naive"]);
  }
}

TEST_CASE("JSON and CSV carry the same numbers") {
  Rng rng(63);
  const Dataset d = oracle::linear_data(rng, 80, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.3));
  const std::string in = write_file("fmt.csv", to_csv(d.y(), d.z()));
  const std::vector<std::string> base{"estimate", "--model", "quantile", "--tau", "0.5", "--intercept",
                                      "--input", in, "--sigma-u", "0.3", "--grid", "0:1:6"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  const Run rj = cli(with({"--format", "json"}));
  const Run rc = cli(with({"--format", "csv", "--digits", "17"}));
  REQUIRE(rj.code == 0);
  REQUIRE(rc.code == 0);
  const json j = json::parse(rj.out);
  const auto csv = csv_values(rc.out);
  const auto theta = as_vector(j["theta_hat"]);
  CHECK(csv.at("theta_hat,alpha,") == theta[0]);
  CHECK(csv.at("theta_hat,beta1,") == theta[1]);
  CHECK(csv.at("naive,beta1,") == as_vector(j["naive"])[1]);
  const auto lambdas = as_vector(j["grid"]["lambda"]);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    std::ostringstream key;
    key << "grid,beta1," << format_number(lambdas[k], 17);
    CHECK(csv.at(key.str()) == j["grid"]["thetas"][k][1].get<double>());
  }
  CHECK(csv.at("rss,beta1,") == as_vector(j["extrapolant"]["rss"])[1]);
}

TEST_CASE("exit codes") {
  CHECK(cli({"estimate", "--model", "linear", "--input", (scratch_dir() / "missing.csv").string(),
             "--sigma-u", "0.1"})
            .code == 1);
  const std::string bad = write_file("bad.csv", "y,z1\n1,2\n2,x\n");
  const Run parse = cli({"estimate", "--model", "linear", "--input", bad, "--sigma-u", "0.1"});
  CHECK(parse.code == 1);
  CHECK(parse.err.find("row 2") != std::string::npos);
  const std::string ok = write_file("ok.csv", "y,z1\n1,0.1\n-1,-0.1\n0.5,0.05\n");
  CHECK(cli({"estimate", "--model", "probit", "--input", ok, "--sigma-u", "0.1"}).code == 3);
  CHECK(cli({"estimate", "--model", "linear", "--input", ok, "--sigma-u", "0.1", "--grid", "1:2:3"}).code == 3);
  CHECK(cli({"estimate", "--bogus-flag"}).code == 3);
  CHECK(cli({}).code == 3);
  // error variance larger than the spread of z: the correction is ill-posed
  CHECK(cli({"estimate", "--model", "linear", "--input", ok, "--sigma-u", "5"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("sigma-u command") {
  const std::string same = write_file("same.csv", "a,b\n1,1\n2,2\n-3,-3\n");
  const Run z = cli({"sigma-u", "--input", same, "--replicates", "a,b", "--format", "json"});
  REQUIRE(z.code == 0);
  CHECK(json::parse(z.out)["sigma_u"][0][0].get<double>() == 0.0);

  const std::string three = write_file("three.csv", "a,b\n-1,1\n0,0\n1,-1\n");
  const Run one = cli({"sigma-u", "--input", three, "--replicates", "a,b", "--format", "json"});
  REQUIRE(one.code == 0);
  CHECK(json::parse(one.out)["sigma_u"][0][0].get<double>() == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(64);
  const Eigen::MatrixXd a = standard_normal_matrix(rng, 50, 2);
  const Eigen::MatrixXd b = standard_normal_matrix(rng, 50, 2);
  std::ostringstream s;
  s.precision(17);
  s << "a1,a2,b1,b2\n";
  for (int i = 0; i < 50; ++i) s << a(i, 0) << ',' << a(i, 1) << ',' << b(i, 0) << ',' << b(i, 1) << '\n';
  const std::string file = write_file("rep50.csv", s.str());
  const Run r = cli({"sigma-u", "--input", file, "--replicates", "a1,b1;a2,b2", "--format", "json"});
  REQUIRE(r.code == 0);
  std::ifstream back(file);
  const Table t = parse_table(back);
  const Eigen::MatrixXd lib = estimate_sigma_u_from_replicates(replicate_pairs(t, {{"a1", "b1"}, {"a2", "b2"}}));
  const json j = json::parse(r.out);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) CHECK(j["sigma_u"][i][k].get<double>() == lib(i, k));

  CHECK(cli({"sigma-u", "--input", file, "--replicates", "a1,zz"}).code == 1);
}

TEST_CASE("estimate with covariance from replicate columns") {
  const std::string in = write_file("reps.csv", "y,a,b\n1,0.9,1.1\n2,2.2,1.8\n0,0.1,-0.1\n-1,-1.2,-0.7\n3,2.9,3.2\n");
  const Run r = cli({"estimate", "--model", "linear", "--input", in, "--response", "y", "--sigma-u-from", "a,b"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["theta_hat"].size() == 1);
}

TEST_CASE("simulate is deterministic and has the table layout") {
  const auto run = [] { return cli({"simulate", "--preset", "table1", "--reps", "3", "--seed", "1"}); };
  const Run a = run();
  const Run b = run();
  // a cell with too many failed replications exits 2 but still writes the table
  CHECK(a.code == b.code);
  CHECK(a.out == b.out);
  std::istringstream in(a.out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("cell,n,sigma_u2,coordinate", 0) == 0);
  int rows = 0;
  std::map<std::string, int> ns, sig;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string cell, n, s2;
    std::getline(ls, cell, ',');
    std::getline(ls, n, ',');
    std::getline(ls, s2, ',');
    ns[n]++;
    sig[s2]++;
  }
  CHECK(rows == 12);
  CHECK(ns.size() == 4);
  CHECK(sig.size() == 3);
}

TEST_CASE("quantile preset lines and the table command") {
  const Run q = cli({"simulate", "--preset", "quantile", "--reps", "2", "--format", "json"});
  REQUIRE(q.code == 0);
  const json j = json::parse(q.out);
  REQUIRE(j["scenarios"].is_array());
  CHECK(j["scenarios"].size() == 8);
  CHECK(j["scenarios"][0]["lines"].size() == 15);

  const std::string study = (scratch_dir() / "study.json").string();
  cli({"simulate", "--preset", "table23", "--reps", "2", "--out", study});
  const Run t = cli({"table", "--input", study});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("MSE") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags") {
  Rng rng(65);
  const Dataset d = oracle::linear_data(rng, 60, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.2));
  const std::string in = write_file("cfg.csv", to_csv(d.y(), d.z()));
  const std::string cfg = write_file("run.toml", "[estimate]\nmodel = \"linear\"\nsigma-u = \"0.2\"\ninput = \"" + in + "\"\n");
  const Run a = cli({"--config", cfg, "estimate"});
  REQUIRE(a.code == 0);
  CHECK(std::abs(json::parse(a.out)["theta_hat"][0].get<double>() -
                 oracle::corrected_least_squares(d, -1.0, false)[0]) < 1e-10);
  const Run b = cli({"--config", cfg, "estimate", "--sigma-u", "0"});
  REQUIRE(b.code == 0);
  const json jb = json::parse(b.out);
  CHECK(jb["theta_hat"] == jb["naive"]);
}

TEST_CASE("S-shaped generic least squares with two extrapolants") {
  Rng rng(66);
  const int n = 400;
  std::normal_distribution<double> x_law(0.0, 1.0), u_law(0.0, std::sqrt(0.05)), e_law(0.0, 0.05);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd z(n, 1);
  for (int i = 0; i < n; ++i) {
    const double x = x_law(rng);
    y[i] = 1.0 - 0.8 / (1.0 + std::exp(2.5 * x)) + e_law(rng);
    z(i, 0) = x + u_law(rng);
  }
  const std::string in = write_file("scurve.csv", to_csv(y, z));
  auto run = [&](const char* kind) {
    return cli({"estimate", "--model", "generic-ls", "--mean-fn", "sshape", "--input", in, "--sigma-u", "0.05",
                "--grid", "0:1:11", "--extrapolant", kind});
  };
  const Run q = run("quadratic");
  const Run l = run("linear");
  REQUIRE(q.code == 0);
  REQUIRE(l.code == 0);
  const json jq = json::parse(q.out);
  const json jl = json::parse(l.out);
  CHECK(jq["theta_hat"].size() == 4);
  CHECK(jq["extrapolant"]["rss"].size() == 4);
  CHECK(jq["theta_hat"] != jl["theta_hat"]);
  // a quadratic nests the linear trend, so its residuals can only be smaller
  const auto rq = as_vector(jq["extrapolant"]["rss"]);
  const auto rl = as_vector(jl["extrapolant"]["rss"]);
  for (int j = 0; j < 4; ++j) CHECK(rq[j] <= rl[j] + 1e-15);
}

}
