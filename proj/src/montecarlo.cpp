#include "exsimex/montecarlo.hpp"

#include "exsimex/error.hpp"
#include "exsimex/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace exsimex {

using nlohmann::json;

std::string_view error_law_name(ErrorLaw law) { return law == ErrorLaw::Normal ? "normal" : "laplace"; }

std::string_view noise_law_name(NoiseLaw law) {
  return law == NoiseLaw::StandardNormal ? "normal" : "chisq2";
}

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Ex: return "ex";
    case Estimator::Classical: return "classical";
    case Estimator::Naive: return "naive";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "ex") return Estimator::Ex;
  if (name == "classical") return Estimator::Classical;
  if (name == "naive") return Estimator::Naive;
  throw ConfigError("unknown estimator '" + std::string(name) + "' (ex, classical, naive)");
}

void Scenario::validate() const {
  model.validate();
  if (n < 2) throw ConfigError("scenario '" + label + "': n must be at least 2");
  if (x_cov.rows() < 1 || x_cov.rows() != x_cov.cols())
    throw ConfigError("scenario '" + label + "': covariate covariance must be square");
  if (sigma_u.rows() != p() || sigma_u.cols() != p())
    throw ConfigError("scenario '" + label + "': Sigma_u dimension does not match the covariates");
  if (theta0.size() != model.parameter_count(p()))
    throw ConfigError("scenario '" + label + "': theta0 has the wrong length");
  if (model.family == Family::GenericLS && model.mean_fn->p != p())
    throw ConfigError("scenario '" + label + "': mean function expects a different covariate dimension");
  if (u_law == ErrorLaw::Laplace) {
    const Eigen::MatrixXd off = sigma_u - Eigen::MatrixXd(sigma_u.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() > 0.0)
      throw ConfigError("scenario '" + label + "': Laplace errors need a diagonal Sigma_u");
  }
  if (!(eps_scale >= 0.0)) throw ConfigError("scenario '" + label + "': eps_scale must be non-negative");
  if (estimator == Estimator::Classical) simex.validate();
}

double draw_noise(NoiseLaw law, Rng& rng) {
  if (law == NoiseLaw::StandardNormal) return std::normal_distribution<double>(0.0, 1.0)(rng);
  // chi-square(2) median log 4, standard deviation 2
  return (std::chi_squared_distribution<double>(2.0)(rng) - 1.3863) / 2.0;
}

SimulatedData simulate_dataset(const Scenario& scenario, Rng& rng) {
  scenario.validate();
  const Eigen::Index n = scenario.n;
  const Eigen::Index p = scenario.p();
  const Eigen::MatrixXd x = normal_rows(rng, n, scenario.x_cov);

  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, p);
  if (scenario.u_law == ErrorLaw::Normal) {
    if (scenario.sigma_u.cwiseAbs().maxCoeff() > 0.0) u = normal_rows(rng, n, scenario.sigma_u);
  } else {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double b = std::sqrt(scenario.sigma_u(j, j) / 2.0);
      for (Eigen::Index i = 0; i < n; ++i) u(i, j) = b > 0.0 ? laplace_draw(rng, b) : 0.0;
    }
  }

  const ModelSpec& model = scenario.model;
  const Eigen::VectorXd& theta = scenario.theta0;
  Eigen::VectorXd index(n);
  if (model.linear_index()) {
    const Eigen::VectorXd beta = model.intercept ? theta.tail(p).eval() : theta;
    index = x * beta;
    if (model.intercept) index.array() += theta[0];
  }

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (model.family) {
      case Family::Poisson:
        y[i] = static_cast<double>(std::poisson_distribution<long>(std::exp(index[i]))(rng));
        break;
      case Family::Logistic:
        y[i] = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-index[i])))(rng) ? 1.0 : 0.0;
        break;
      case Family::LPRE:
      case Family::LARE:
        y[i] = std::exp(index[i] + scenario.eps_scale * std::normal_distribution<double>(0.0, 1.0)(rng));
        break;
      case Family::Exponential:
        y[i] = std::exp(index[i]) + scenario.eps_scale * draw_noise(scenario.eps_law, rng);
        break;
      case Family::Sine:
        y[i] = std::sin(index[i]) + scenario.eps_scale * draw_noise(scenario.eps_law, rng);
        break;
      case Family::GenericLS:
        y[i] = model.mean_fn->value(x.row(i).transpose(), theta) +
               scenario.eps_scale * draw_noise(scenario.eps_law, rng);
        break;
      default:
        y[i] = index[i] + scenario.eps_scale * draw_noise(scenario.eps_law, rng);
        break;
    }
  }
  return {Dataset(std::move(y), x + u, scenario.sigma_u), x, theta};
}

SummaryRow summarize(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& theta0) {
  if (estimates.size() < 2) throw ConfigError("summarize needs at least two estimates");
  const auto r = static_cast<double>(estimates.size());
  SummaryRow row;
  row.mean = Eigen::VectorXd::Zero(theta0.size());
  for (const auto& e : estimates) {
    if (e.size() != theta0.size()) throw ConfigError("summarize: estimate length differs from theta0");
    row.mean += e;
  }
  row.mean /= r;
  row.bias = row.mean - theta0;
  row.variance = Eigen::VectorXd::Zero(theta0.size());
  row.mse = Eigen::VectorXd::Zero(theta0.size());
  for (const auto& e : estimates) {
    row.variance += (e - row.mean).array().square().matrix();
    row.mse += (e - theta0).array().square().matrix();
  }
  row.variance /= r;
  row.mse /= r;
  return row;
}

Eigen::VectorXd run_estimator(const Scenario& scenario, const Dataset& data, std::uint64_t stream_seed) {
  switch (scenario.estimator) {
    case Estimator::Ex: return ex_estimate(scenario.model, data, scenario.ex).theta_hat.flat();
    case Estimator::Classical: {
      SimexConfig cfg = scenario.simex;
      cfg.seed = stream_seed;
      cfg.workers = 1;
      return classical_simex(scenario.model, data, cfg).estimate.theta_hat.flat();
    }
    case Estimator::Naive: {
      const MinimizeResult r = naive_fit(scenario.model, data, scenario.ex.options);
      if (!r.converged) throw EstimationError("naive fit did not converge");
      return r.theta_hat;
    }
  }
  throw ConfigError("unknown estimator");
}

StudyTable run_study(const std::string& name, const std::vector<Scenario>& cells, const StudyOptions& options) {
  if (options.replications < 2) throw ConfigError("a study needs at least two replications");
  for (const auto& c : cells) c.validate();
  StudyTable table;
  table.name = name;
  table.cells.reserve(cells.size());

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Scenario& scenario = cells[c];
    const auto reps = static_cast<std::size_t>(options.replications);
    CellResult cell;
    cell.label = scenario.label;
    cell.n = scenario.n;
    cell.sigma_u2 = scenario.sigma_u(0, 0);
    cell.theta0 = scenario.theta0;
    cell.replications = options.replications;
    cell.estimates.assign(reps, std::nullopt);
    std::vector<std::string> errors(reps);

    const auto start = std::chrono::steady_clock::now();
    parallel_for(
        reps,
        [&](std::size_t r) {
          Rng rng = keyed_stream(options.seed, {c, r});
          try {
            const SimulatedData sim = simulate_dataset(scenario, rng);
            Eigen::VectorXd est = run_estimator(scenario, sim.data, mix64(options.seed ^ mix64(c * 1000003 + r)));
            if (!est.allFinite()) throw EstimationError("non-finite estimate");
            cell.estimates[r] = std::move(est);
          } catch (const Error& e) {
            errors[r] = e.what();
          }
        },
        options.workers);
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<Eigen::VectorXd> ok;
    ok.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      if (cell.estimates[r]) {
        ok.push_back(*cell.estimates[r]);
      } else {
        if (cell.failures == 0) cell.first_failure = "replication " + std::to_string(r) + ": " + errors[r];
        ++cell.failures;
      }
    }
    cell.failed = cell.failures > options.max_failure_fraction * static_cast<double>(reps);
    if (ok.size() >= 2) {
      cell.summary = summarize(ok, scenario.theta0);
    } else {
      const Eigen::VectorXd nan = Eigen::VectorXd::Constant(scenario.theta0.size(), std::nan(""));
      cell.summary = {nan, nan, nan, nan};
      cell.failed = true;
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

Scenario exponential_scenario(int n, double sigma_u2) {
  Scenario s;
  s.model = make_model(Family::Exponential);
  s.theta0 = Eigen::VectorXd::Constant(1, 1.0);
  s.n = n;
  s.x_cov = Eigen::MatrixXd::Identity(1, 1);
  s.sigma_u = Eigen::MatrixXd::Constant(1, 1, sigma_u2);
  std::ostringstream label;
  label << "n=" << n << " su2=" << sigma_u2;
  s.label = label.str();
  return s;
}

Scenario bivariate_exponential_scenario(int n, double sigma2) {
  Scenario s;
  s.model = make_model(Family::Exponential);
  s.theta0 = Eigen::Vector2d(0.5, 1.0);
  s.n = n;
  s.x_cov = Eigen::Matrix2d::Identity();
  s.sigma_u = sigma2 * (Eigen::Matrix2d() << 1.0, 0.5, 0.5, 1.0).finished();
  std::ostringstream label;
  label << "n=" << n << " su2=" << sigma2;
  s.label = label.str();
  return s;
}

namespace {

const std::vector<int> kTableSizes{200, 300, 500, 800};

}  // namespace

std::vector<Scenario> table1_cells(Estimator estimator) {
  std::vector<Scenario> cells;
  for (int n : kTableSizes)
    for (double s2 : {0.5, 0.25, 0.1}) {
      cells.push_back(exponential_scenario(n, s2));
      cells.back().estimator = estimator;
    }
  return cells;
}

std::vector<Scenario> table23_cells(Estimator estimator) {
  std::vector<Scenario> cells;
  for (int n : kTableSizes)
    for (double s2 : {0.25, 0.2, 0.1}) {
      cells.push_back(bivariate_exponential_scenario(n, s2));
      cells.back().estimator = estimator;
    }
  return cells;
}

std::string QuantileScenario::label() const {
  std::ostringstream out;
  out << "n=" << n << " su=" << sigma_u << " eps=" << noise_law_name(eps_law);
  return out.str();
}

QuantileReport quantile_lines_study(const QuantileScenario& qs, const std::vector<double>& taus, int replications,
                                    std::uint64_t seed, unsigned workers) {
  if (replications < 1) throw ConfigError("quantile study needs at least one replication");
  if (taus.empty()) throw ConfigError("quantile study needs at least one level");
  for (double t : taus)
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("quantile levels must lie in (0, 1)");

  Scenario base;
  base.label = qs.label();
  base.model = make_model(Family::Quantile, 0.5, true);
  base.theta0 = Eigen::Vector2d(qs.beta0, qs.beta1);
  base.n = qs.n;
  base.x_cov = Eigen::MatrixXd::Identity(1, 1);
  base.sigma_u = Eigen::MatrixXd::Constant(1, 1, qs.sigma_u * qs.sigma_u);
  base.eps_law = qs.eps_law;

  const auto reps = static_cast<std::size_t>(replications);
  const std::size_t levels = taus.size();
  struct Fit {
    bool ok = false;
    Eigen::Vector2d ex, oracle, naive;
  };
  std::vector<Fit> fits(reps * levels);
  std::vector<std::string> errors(reps * levels);

  parallel_for(
      reps,
      [&](std::size_t r) {
        Rng rng = keyed_stream(seed, {r});
        const SimulatedData sim = simulate_dataset(base, rng);
        const Dataset truth(sim.data.y(), sim.x, Eigen::MatrixXd::Zero(1, 1));
        for (std::size_t t = 0; t < levels; ++t) {
          const ModelSpec model = make_model(Family::Quantile, taus[t], true);
          Fit& f = fits[r * levels + t];
          try {
            ExConfig cfg;
            cfg.grid = qs.grid;
            cfg.kind = qs.kind;
            const MinimizeResult oracle = naive_fit(model, truth, cfg.options);
            const MinimizeResult naive = naive_fit(model, sim.data, cfg.options);
            if (!oracle.converged || !naive.converged) throw EstimationError("quantile fit did not converge");
            f.ex = ex_estimate(model, sim.data, cfg).theta_hat.flat();
            f.oracle = oracle.theta_hat;
            f.naive = naive.theta_hat;
            f.ok = f.ex.allFinite();
          } catch (const Error& e) {
            errors[r * levels + t] = e.what();
          }
        }
      },
      workers);

  QuantileReport report;
  report.scenario = qs;
  report.replications = replications;
  for (std::size_t t = 0; t < levels; ++t) {
    QuantileLevelSummary level;
    level.tau = taus[t];
    Eigen::Vector2d ex = Eigen::Vector2d::Zero(), oracle = ex, naive = ex;
    int closer = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Fit& f = fits[r * levels + t];
      if (!f.ok) {
        ++level.failures;
        continue;
      }
      ++level.successes;
      ex += f.ex;
      oracle += f.oracle;
      naive += f.naive;
      if (std::abs(f.ex[1] - f.oracle[1]) < std::abs(f.naive[1] - f.oracle[1])) ++closer;
      level.ex_distance += (f.ex - f.oracle).cwiseAbs().maxCoeff();
      level.naive_distance += (f.naive - f.oracle).cwiseAbs().maxCoeff();
    }
    if (level.successes == 0)
      throw EstimationError("quantile study: every replication failed at tau " + format_number(taus[t], 6) +
                            ": " + errors[t]);
    const double k = level.successes;
    level.ex_closer_fraction = closer / k;
    level.ex_distance /= k;
    level.naive_distance /= k;
    ex /= k;
    oracle /= k;
    naive /= k;
    report.lines.push_back({taus[t], "ex", ex[0], ex[1]});
    report.lines.push_back({taus[t], "oracle", oracle[0], oracle[1]});
    report.lines.push_back({taus[t], "naive", naive[0], naive[1]});
    report.levels.push_back(level);
  }
  return report;
}

std::vector<QuantileScenario> quantile_preset() {
  std::vector<QuantileScenario> out;
  for (NoiseLaw law : {NoiseLaw::StandardNormal, NoiseLaw::ChiSquare2})
    for (double su : {0.1, 0.5})
      for (int n : {300, 500}) {
        QuantileScenario q;
        q.n = n;
        q.sigma_u = su;
        q.eps_law = law;
        out.push_back(q);
      }
  return out;
}

Scenario poisson_misspec_scenario(int n, ErrorLaw law, const MisspecOptions& options) {
  Scenario s;
  s.model = make_model(Family::Poisson);
  s.theta0 = Eigen::VectorXd::Constant(1, options.theta0);
  s.n = n;
  s.x_cov = Eigen::MatrixXd::Constant(1, 1, options.sigma_x2);
  s.sigma_u = Eigen::MatrixXd::Constant(1, 1, options.sigma_u2);
  s.u_law = law;
  s.label = std::string(error_law_name(law)) + " n=" + std::to_string(n);
  return s;
}

const MisspecRow& MisspecReport::row(std::string_view law, int n) const {
  for (const auto& r : rows)
    if (r.error_law == law && r.n == n) return r;
  throw ConfigError("misspecification report has no row " + std::string(law) + " n=" + std::to_string(n));
}

MisspecReport misspecification_study(std::uint64_t seed, const MisspecOptions& options) {
  if (options.seeds < 1) throw ConfigError("misspecification study needs at least one seed");
  std::vector<Scenario> cells;
  for (ErrorLaw law : {ErrorLaw::Laplace, ErrorLaw::Normal})
    for (int n : options.sizes) cells.push_back(poisson_misspec_scenario(n, law, options));

  MisspecReport report;
  report.options = options;
  for (const auto& c : cells) report.rows.push_back({std::string(error_law_name(c.u_law)), c.n, 0.0, {}, 0});

  for (int s = 0; s < options.seeds; ++s) {
    StudyOptions so;
    so.replications = options.replications;
    so.seed = mix64(seed ^ mix64(static_cast<std::uint64_t>(s) + 0x5EED));
    so.workers = options.workers;
    const StudyTable t = run_study("misspec", cells, so);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (t.cells[c].failed) throw EstimationError("misspecification cell '" + cells[c].label +
                                                   "' failed: " + t.cells[c].first_failure);
      report.rows[c].seed_bias.push_back(t.cells[c].summary.bias[0]);
      report.rows[c].failures += t.cells[c].failures;
    }
  }
  for (auto& r : report.rows) {
    double sum = 0.0;
    for (double b : r.seed_bias) sum += b;
    r.bias = sum / static_cast<double>(r.seed_bias.size());
  }
  return report;
}

std::string format_number(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i]))
      a.push_back(v[i]);
    else
      a.push_back(nullptr);
  }
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = a[i].is_null() ? std::nan("") : a[i].get<double>();
  return v;
}

}  // namespace

void write_study_csv(std::ostream& out, const StudyTable& table, int digits) {
  out << "cell,n,sigma_u2,coordinate,theta0,mean,bias,variance,mse,replications,failures\n";
  for (const auto& c : table.cells) {
    for (Eigen::Index j = 0; j < c.theta0.size(); ++j) {
      out << '"' << c.label << "\"," << c.n << ',' << format_number(c.sigma_u2, digits) << ','
          << "theta" << j + 1 << ',' << format_number(c.theta0[j], digits) << ','
          << format_number(c.summary.mean[j], digits) << ',' << format_number(c.summary.bias[j], digits) << ','
          << format_number(c.summary.variance[j], digits) << ',' << format_number(c.summary.mse[j], digits)
          << ',' << c.replications << ',' << c.failures << '\n';
    }
  }
}

void write_study_json(std::ostream& out, const StudyTable& table) {
  json cells = json::array();
  for (const auto& c : table.cells) {
    json cell = {{"label", c.label},
                 {"n", c.n},
                 {"sigma_u2", c.sigma_u2},
                 {"theta0", vec_json(c.theta0)},
                 {"replications", c.replications},
                 {"failures", c.failures},
                 {"failed", c.failed},
                 {"mean", vec_json(c.summary.mean)},
                 {"bias", vec_json(c.summary.bias)},
                 {"variance", vec_json(c.summary.variance)},
                 {"mse", vec_json(c.summary.mse)}};
    if (c.failures > 0) cell["first_failure"] = c.first_failure;
    cells.push_back(std::move(cell));
  }
  out << json{{"study", table.name}, {"cells", cells}}.dump(2) << '\n';
}

StudyTable read_study_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(std::string("study file is not valid JSON: ") + e.what());
  }
  try {
    StudyTable t;
    t.name = doc.at("study").get<std::string>();
    for (const auto& c : doc.at("cells")) {
      CellResult cell;
      cell.label = c.at("label").get<std::string>();
      cell.n = c.at("n").get<int>();
      cell.sigma_u2 = c.at("sigma_u2").get<double>();
      cell.theta0 = json_vec(c.at("theta0"));
      cell.replications = c.at("replications").get<int>();
      cell.failures = c.at("failures").get<int>();
      cell.failed = c.at("failed").get<bool>();
      cell.summary = {json_vec(c.at("mean")), json_vec(c.at("bias")), json_vec(c.at("variance")),
                      json_vec(c.at("mse"))};
      t.cells.push_back(std::move(cell));
    }
    return t;
  } catch (const json::exception& e) {
    throw InputError(std::string("study file is missing fields: ") + e.what());
  }
}

void write_paper_table(std::ostream& out, const StudyTable& table, int decimals) {
  std::vector<std::vector<std::string>> rows(7);
  rows[0] = {""};
  rows[1] = {"n"};
  rows[2] = {"sigma_u^2"};
  rows[3] = {"Mean"};
  rows[4] = {"Bias"};
  rows[5] = {"Variance"};
  rows[6] = {"MSE"};
  auto fixed = [decimals](double v) {
    if (!std::isfinite(v)) return std::string("nan");
    std::ostringstream s;
    s << std::fixed << std::setprecision(decimals) << v;
    return s.str();
  };
  for (const auto& c : table.cells) {
    for (Eigen::Index j = 0; j < c.theta0.size(); ++j) {
      rows[0].push_back("theta" + std::to_string(j + 1));
      rows[1].push_back(std::to_string(c.n));
      rows[2].push_back(format_number(c.sigma_u2, 6));
      rows[3].push_back(fixed(c.summary.mean[j]));
      rows[4].push_back(fixed(c.summary.bias[j]));
      rows[5].push_back(fixed(c.summary.variance[j]));
      rows[6].push_back(fixed(c.summary.mse[j]));
    }
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0)
        out << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      else
        out << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
    }
    out << '\n';
  }
  out << std::left;
}

void write_quantile_csv(std::ostream& out, const std::vector<QuantileReport>& reports, int digits) {
  out << "scenario,n,sigma_u,eps,tau,estimator,intercept,slope\n";
  for (const auto& rep : reports)
    for (const auto& l : rep.lines)
      out << '"' << rep.scenario.label() << "\"," << rep.scenario.n << ','
          << format_number(rep.scenario.sigma_u, digits) << ',' << noise_law_name(rep.scenario.eps_law) << ','
          << format_number(l.tau, digits) << ',' << l.estimator << ',' << format_number(l.intercept, digits)
          << ',' << format_number(l.slope, digits) << '\n';
}

void write_quantile_json(std::ostream& out, const std::vector<QuantileReport>& reports) {
  json arr = json::array();
  for (const auto& rep : reports) {
    json lines = json::array();
    for (const auto& l : rep.lines)
      lines.push_back({{"tau", l.tau}, {"estimator", l.estimator}, {"intercept", l.intercept}, {"slope", l.slope}});
    json levels = json::array();
    for (const auto& l : rep.levels)
      levels.push_back({{"tau", l.tau},
                        {"successes", l.successes},
                        {"failures", l.failures},
                        {"ex_closer_fraction", l.ex_closer_fraction},
                        {"ex_distance", l.ex_distance},
                        {"naive_distance", l.naive_distance}});
    arr.push_back({{"scenario", rep.scenario.label()},
                   {"n", rep.scenario.n},
                   {"sigma_u", rep.scenario.sigma_u},
                   {"eps", noise_law_name(rep.scenario.eps_law)},
                   {"replications", rep.replications},
                   {"lines", lines},
                   {"levels", levels}});
  }
  out << json{{"study", "quantile"}, {"scenarios", arr}}.dump(2) << '\n';
}

void write_misspec_csv(std::ostream& out, const MisspecReport& report, int digits) {
  out << "error_law,n,bias";
  for (int s = 0; s < report.options.seeds; ++s) out << ",bias_seed" << s + 1;
  out << ",failures\n";
  for (const auto& r : report.rows) {
    out << r.error_law << ',' << r.n << ',' << format_number(r.bias, digits);
    for (double b : r.seed_bias) out << ',' << format_number(b, digits);
    out << ',' << r.failures << '\n';
  }
}

void write_misspec_json(std::ostream& out, const MisspecReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"error_law", r.error_law},
                    {"n", r.n},
                    {"bias", r.bias},
                    {"seed_bias", r.seed_bias},
                    {"failures", r.failures}});
  const auto& o = report.options;
  out << json{{"study", "misspec"},
              {"theta0", o.theta0},
              {"sigma_x2", o.sigma_x2},
              {"sigma_u2", o.sigma_u2},
              {"replications", o.replications},
              {"seeds", o.seeds},
              {"rows", rows}}
             .dump(2)
      << '\n';
}

}  // namespace exsimex
