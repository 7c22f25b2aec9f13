#include "exsimex/cli.hpp"

#include "exsimex/error.hpp"
#include "exsimex/montecarlo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace exsimex {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json rows_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
}

std::vector<std::string> coordinate_names(const ModelSpec& model, Eigen::Index q) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < q; ++j) names.push_back(coordinate_name(j, model.intercept));
  return names;
}

std::string read_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("input file '" + path + "' does not exist");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

OutputFormat resolve_format(const std::string& fmt, const std::string& out_path, OutputFormat fallback) {
  if (fmt == "csv") return OutputFormat::Csv;
  if (fmt == "json") return OutputFormat::Json;
  if (!fmt.empty()) throw ConfigError("unknown format '" + fmt + "' (csv, json)");
  const auto ext = std::filesystem::path(out_path).extension().string();
  if (ext == ".json") return OutputFormat::Json;
  if (ext == ".csv") return OutputFormat::Csv;
  return fallback;
}

/// Writes to the named file, or to `fallback` when the path is empty.
template <class Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  write(f);
  if (!f) throw InputError("error writing '" + path + "'");
}

struct EstimateArgs {
  std::string model = "linear";
  double tau = -1.0;
  bool intercept = false;
  std::string mean_fn;
  std::string input;
  std::string response;
  std::string covariates;
  std::string sigma_u;
  std::string sigma_u_from;
  std::string grid;
  std::string extrapolant = "quadratic";
  bool force_grid = false;
  std::string estimator = "ex";
  int b = 100;
  std::uint64_t seed = 1;
  std::string method = "bfgs";
  int max_iters = 500;
  unsigned workers = 0;
  std::string out;
  std::string format;
  int digits = 6;
};

struct SimulateArgs {
  std::string preset;
  int reps = -1;
  std::uint64_t seed = 1;
  std::string estimator = "ex";
  int b = 100;
  int seeds = 5;
  std::string grid;
  std::string extrapolant;
  unsigned workers = 0;
  std::string out;
  std::string format;
  int digits = 6;
};

struct SigmaArgs {
  std::string input;
  std::string replicates;
  std::string out;
  std::string format;
  int digits = 6;
};

struct TableArgs {
  std::string input;
  std::string out;
  int digits = 3;
};

ModelSpec build_model(const EstimateArgs& a) {
  const Family family = parse_family(a.model);
  std::optional<double> tau;
  if (a.tau >= 0.0) tau = a.tau;
  if (!tau && (family == Family::Quantile || family == Family::Expectile)) tau = 0.5;
  ModelSpec m;
  m.family = family;
  m.tau = tau;
  m.intercept = a.intercept;
  if (family == Family::GenericLS) {
    // validated once the mean function is attached
    if (a.mean_fn.empty()) throw ConfigError("generic-ls needs --mean-fn (linear, exponential, sshape)");
  } else if (!a.mean_fn.empty()) {
    throw ConfigError("--mean-fn only applies to generic-ls");
  } else {
    m.validate();
  }
  return m;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  ModelSpec model = build_model(a);
  if (a.input.empty()) throw ConfigError("estimate needs --input");
  if (a.sigma_u.empty() == a.sigma_u_from.empty())
    throw ConfigError("give exactly one of --sigma-u and --sigma-u-from");
  const std::string text = read_file(a.input);

  ColumnMap columns;
  columns.response = a.response;
  if (!a.covariates.empty()) columns.covariates = split(a.covariates, ',');
  SigmaSource sigma = FromReplicates{};
  if (!a.sigma_u_from.empty()) {
    columns.replicates = parse_replicate_spec(a.sigma_u_from);
  } else {
    std::istringstream probe(text);
    const Table t = parse_table(probe);
    const std::size_t p = columns.covariates.empty() ? t.header.size() - 1 : columns.covariates.size();
    sigma = parse_sigma_u(a.sigma_u, static_cast<Eigen::Index>(p));
  }
  std::istringstream in(text);
  const Dataset data = load_dataset(in, columns, sigma);
  if (model.family == Family::GenericLS) model.mean_fn = builtin_mean_function(a.mean_fn, data.p());
  model.validate();
  for (const auto& w : data.warnings()) err << "warning: " << w << '\n';

  ExConfig cfg;
  if (!a.grid.empty()) cfg.grid = LambdaGrid::parse(a.grid);
  cfg.kind = parse_extrapolant(a.extrapolant);
  cfg.force_grid = a.force_grid;
  if (a.method == "bfgs")
    cfg.options.minimize.method = Method::QuasiNewton;
  else if (a.method == "simplex")
    cfg.options.minimize.method = Method::Simplex;
  else
    throw ConfigError("unknown --method '" + a.method + "' (bfgs, simplex)");
  cfg.options.minimize.max_iters = a.max_iters;

  EstimateReport report;
  report.model = model;
  report.estimator = a.estimator;
  report.warnings = data.warnings();
  const Estimator est = parse_estimator(a.estimator);
  if (est == Estimator::Ex) {
    report.result = ex_estimate(model, data, cfg);
  } else if (est == Estimator::Classical) {
    SimexConfig sc;
    sc.b = a.b;
    sc.grid = cfg.grid;
    sc.kind = cfg.kind;
    sc.seed = a.seed;
    sc.naive_options = cfg.options;
    sc.workers = a.workers;
    report.simex = classical_simex(model, data, sc);
    report.result = report.simex->estimate;
  } else {
    const MinimizeResult r = naive_fit(model, data, cfg.options);
    if (!r.converged) throw EstimationError("naive fit did not converge");
    report.result.theta_hat = Theta::from_flat(r.theta_hat, model.intercept);
    report.result.naive = report.result.theta_hat;
    report.result.direct = summarize_minimization(r);
  }

  const OutputFormat fmt = resolve_format(a.format, a.out, OutputFormat::Json);
  emit(a.out, out, [&](std::ostream& o) {
    if (fmt == OutputFormat::Json)
      write_estimate_json(o, report);
    else
      write_estimate_csv(o, report, a.digits);
  });
  return 0;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const OutputFormat fmt = resolve_format(a.format, a.out, OutputFormat::Csv);
  const Estimator est = parse_estimator(a.estimator);
  if (a.preset == "table1" || a.preset == "table23") {
    std::vector<Scenario> cells = a.preset == "table1" ? table1_cells(est) : table23_cells(est);
    for (auto& c : cells) {
      if (!a.grid.empty()) c.ex.grid = c.simex.grid = LambdaGrid::parse(a.grid);
      if (!a.extrapolant.empty()) c.ex.kind = c.simex.kind = parse_extrapolant(a.extrapolant);
      c.simex.b = a.b;
    }
    StudyOptions so;
    so.replications = a.reps > 0 ? a.reps : 500;
    so.seed = a.seed;
    so.workers = a.workers;
    const StudyTable table = run_study(a.preset, cells, so);
    for (const auto& c : table.cells) {
      err << c.label << ": " << c.seconds << " s";
      if (c.failures) err << ", " << c.failures << " failures (" << c.first_failure << ")";
      err << '\n';
    }
    emit(a.out, out, [&](std::ostream& o) {
      if (fmt == OutputFormat::Json)
        write_study_json(o, table);
      else
        write_study_csv(o, table, a.digits);
    });
    for (const auto& c : table.cells)
      if (c.failed) {
        err << "cell '" << c.label << "' failed: " << c.failures << " of " << c.replications
            << " replications failed\n";
        return static_cast<int>(Error::Category::Estimation);
      }
    return 0;
  }
  if (a.preset == "quantile") {
    std::vector<QuantileReport> reports;
    for (QuantileScenario qs : quantile_preset()) {
      if (!a.grid.empty()) qs.grid = LambdaGrid::parse(a.grid);
      if (!a.extrapolant.empty()) qs.kind = parse_extrapolant(a.extrapolant);
      reports.push_back(quantile_lines_study(qs, kQuantileLevels, a.reps > 0 ? a.reps : 100, a.seed, a.workers));
    }
    emit(a.out, out, [&](std::ostream& o) {
      if (fmt == OutputFormat::Json)
        write_quantile_json(o, reports);
      else
        write_quantile_csv(o, reports, a.digits);
    });
    return 0;
  }
  if (a.preset == "misspec") {
    MisspecOptions mo;
    if (a.reps > 0) mo.replications = a.reps;
    mo.seeds = a.seeds;
    mo.workers = a.workers;
    const MisspecReport report = misspecification_study(a.seed, mo);
    emit(a.out, out, [&](std::ostream& o) {
      if (fmt == OutputFormat::Json)
        write_misspec_json(o, report);
      else
        write_misspec_csv(o, report, a.digits);
    });
    return 0;
  }
  throw ConfigError("unknown preset '" + a.preset + "' (table1, table23, quantile, misspec)");
}

int cmd_sigma_u(const SigmaArgs& a, std::ostream& out) {
  if (a.input.empty()) throw ConfigError("sigma-u needs --input");
  if (a.replicates.empty()) throw ConfigError("sigma-u needs --replicates");
  std::istringstream in(read_file(a.input));
  const Table t = parse_table(in);
  const Eigen::MatrixXd su = estimate_sigma_u_from_replicates(replicate_pairs(t, parse_replicate_spec(a.replicates)));
  const OutputFormat fmt = resolve_format(a.format, a.out, OutputFormat::Csv);
  emit(a.out, out, [&](std::ostream& o) {
    if (fmt == OutputFormat::Json)
      write_matrix_json(o, su);
    else
      write_matrix_csv(o, su, a.digits);
  });
  return 0;
}

int cmd_table(const TableArgs& a, std::ostream& out) {
  if (a.input.empty()) throw ConfigError("table needs --input");
  std::istringstream in(read_file(a.input));
  const StudyTable t = read_study_json(in);
  emit(a.out, out, [&](std::ostream& o) { write_paper_table(o, t, a.digits); });
  return 0;
}

}  // namespace

void write_estimate_json(std::ostream& out, const EstimateReport& report) {
  const EstimateResult& r = report.result;
  const Eigen::VectorXd theta = r.theta_hat.flat();
  json doc;
  doc["family"] = family_name(report.model.family);
  if (report.model.tau) doc["tau"] = *report.model.tau;
  doc["intercept"] = report.model.intercept;
  if (report.model.mean_fn) doc["mean_fn"] = report.model.mean_fn->name;
  doc["estimator"] = report.estimator;
  doc["path"] = r.path == EstimatePath::Direct ? "direct" : "extrapolated";
  doc["coordinates"] = coordinate_names(report.model, theta.size());
  doc["theta_hat"] = vec_json(theta);
  doc["naive"] = vec_json(r.naive.flat());
  if (r.direct) {
    doc["direct"] = {{"value", r.direct->value},
                     {"grad_norm", r.direct->grad_norm},
                     {"iterations", r.direct->iters},
                     {"converged", r.direct->converged},
                     {"status", status_name(r.direct->status)}};
  }
  if (r.grid) {
    json g = {{"lambda", r.grid->grid.values()}, {"thetas", rows_json(r.grid->thetas)}};
    if (!r.grid->diagnostics.empty()) {
      json diag = json::array();
      for (const auto& d : r.grid->diagnostics)
        diag.push_back({{"value", d.value}, {"grad_norm", d.grad_norm}, {"converged", d.converged}});
      g["diagnostics"] = diag;
    }
    doc["grid"] = g;
  }
  if (r.extrapolant) {
    doc["extrapolant"] = {{"kind", extrapolant_name(r.extrapolant->kind)},
                          {"gamma", rows_json(r.extrapolant->gamma)},
                          {"rss", vec_json(r.extrapolant->rss)}};
  }
  if (report.simex) {
    doc["simex"] = {{"tbar_se", rows_json(report.simex->tbar_se)}, {"theta_se", vec_json(report.simex->theta_se)}};
  }
  doc["warnings"] = report.warnings;
  out << doc.dump(2) << '\n';
}

void write_estimate_csv(std::ostream& out, const EstimateReport& report, int digits) {
  const EstimateResult& r = report.result;
  const Eigen::VectorXd theta = r.theta_hat.flat();
  const auto names = coordinate_names(report.model, theta.size());
  auto row = [&](const std::string& quantity, Eigen::Index j, std::optional<double> lambda, double v) {
    out << quantity << ',' << names[static_cast<std::size_t>(j)] << ','
        << (lambda ? format_number(*lambda, digits) : "") << ',' << format_number(v, digits) << '\n';
  };
  out << "quantity,coordinate,lambda,value\n";
  for (Eigen::Index j = 0; j < theta.size(); ++j) row("theta_hat", j, std::nullopt, theta[j]);
  const Eigen::VectorXd naive = r.naive.flat();
  for (Eigen::Index j = 0; j < naive.size(); ++j) row("naive", j, std::nullopt, naive[j]);
  if (r.grid) {
    for (Eigen::Index k = 0; k < r.grid->thetas.rows(); ++k)
      for (Eigen::Index j = 0; j < r.grid->thetas.cols(); ++j)
        row("grid", j, r.grid->grid.values()[static_cast<std::size_t>(k)], r.grid->thetas(k, j));
  }
  if (r.extrapolant) {
    static const char* coef[] = {"gamma_a", "gamma_b", "gamma_c"};
    for (Eigen::Index c = 0; c < r.extrapolant->gamma.cols(); ++c)
      for (Eigen::Index j = 0; j < r.extrapolant->gamma.rows(); ++j) row(coef[c], j, std::nullopt, r.extrapolant->gamma(j, c));
    for (Eigen::Index j = 0; j < r.extrapolant->rss.size(); ++j) row("rss", j, std::nullopt, r.extrapolant->rss[j]);
  }
  if (report.simex) {
    const auto& s = *report.simex;
    for (Eigen::Index k = 0; k < s.tbar_se.rows(); ++k)
      for (Eigen::Index j = 0; j < s.tbar_se.cols(); ++j)
        row("tbar_se", j, r.grid->grid.values()[static_cast<std::size_t>(k)], s.tbar_se(k, j));
    for (Eigen::Index j = 0; j < s.theta_se.size(); ++j) row("theta_se", j, std::nullopt, s.theta_se[j]);
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, int digits) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_number(m(i, j), digits);
    out << '\n';
  }
}

void write_matrix_json(std::ostream& out, const Eigen::MatrixXd& m) {
  out << json{{"sigma_u", rows_json(m)}}.dump(2) << '\n';
}

std::vector<std::pair<std::string, std::string>> parse_replicate_spec(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& item : split(text, ';')) {
    const auto names = split(item, ',');
    if (names.size() != 2 || names[0].empty() || names[1].empty())
      throw ConfigError("replicate columns must be given as 'a1,b1;a2,b2', got '" + text + "'");
    pairs.emplace_back(names[0], names[1]);
  }
  if (pairs.empty()) throw ConfigError("no replicate columns given");
  return pairs;
}

Eigen::MatrixXd parse_sigma_u(const std::string& text, Eigen::Index p) {
  std::vector<double> v;
  for (const auto& item : split(text, ',')) v.push_back(parse_double(item, "--sigma-u"));
  const auto k = static_cast<Eigen::Index>(v.size());
  if (k == 1) return v[0] * Eigen::MatrixXd::Identity(p, p);
  if (k == p) return Eigen::Map<const Eigen::VectorXd>(v.data(), p).asDiagonal();
  if (k == p * p) return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), p, p);
  std::ostringstream msg;
  msg << "--sigma-u has " << k << " values; expected 1, " << p << " or " << p * p;
  throw ConfigError(msg.str());
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation-free SIMEX extrapolation estimation"};
  app.set_config("--config", "", "Read options from a TOML/INI file (command-line flags take precedence)");
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate a measurement-error model from a CSV file");
  est->add_option("--model", ea.model, "Family: linear, exponential, sine, poisson, logistic, lpre, lare, quantile, walsh, expectile, generic-ls")
      ->capture_default_str();
  est->add_option("--tau", ea.tau, "Quantile or expectile level (default 0.5)");
  est->add_flag("--intercept", ea.intercept, "Include an intercept");
  est->add_option("--mean-fn", ea.mean_fn, "Mean function for generic-ls: linear, exponential, sshape");
  est->add_option("--input", ea.input, "Input CSV file")->required();
  est->add_option("--response", ea.response, "Response column (default: first column)");
  est->add_option("--covariates", ea.covariates, "Comma-separated covariate columns (default: all others)");
  est->add_option("--sigma-u", ea.sigma_u, "Measurement error covariance: v, diagonal, or full row-major list");
  est->add_option("--sigma-u-from", ea.sigma_u_from, "Replicate column pairs 'a1,b1;a2,b2'");
  est->add_option("--grid", ea.grid, "Lambda grid '0:2:21' or a comma-separated list");
  est->add_option("--extrapolant", ea.extrapolant, "linear, quadratic or rational")->capture_default_str();
  est->add_flag("--force-grid", ea.force_grid, "Use the lambda-grid path even for pluggable families");
  est->add_option("--estimator", ea.estimator, "ex, classical or naive")->capture_default_str();
  est->add_option("--b", ea.b, "Pseudo-data sets per grid point for classical SIMEX")->capture_default_str();
  est->add_option("--seed", ea.seed, "Seed for classical SIMEX")->capture_default_str();
  est->add_option("--method", ea.method, "Minimizer: bfgs or simplex")->capture_default_str();
  est->add_option("--max-iters", ea.max_iters, "Minimizer iteration limit")->capture_default_str();
  est->add_option("--workers", ea.workers, "Worker threads (0 = all cores)");
  est->add_option("--out", ea.out, "Output file (default: standard output)");
  est->add_option("--format", ea.format, "csv or json (default from --out extension, else json)");
  est->add_option("--digits", ea.digits, "Significant digits in CSV output")->capture_default_str();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a simulation study preset");
  sim->add_option("--preset", sa.preset, "table1, table23, quantile or misspec")->required();
  sim->add_option("--reps", sa.reps, "Replications per cell (default 500; quantile 100; misspec 200 per seed)");
  sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  sim->add_option("--estimator", sa.estimator, "ex, classical or naive (table presets)")->capture_default_str();
  sim->add_option("--b", sa.b, "Pseudo-data sets for the classical estimator")->capture_default_str();
  sim->add_option("--seeds", sa.seeds, "Seed battery size for misspec")->capture_default_str();
  sim->add_option("--grid", sa.grid, "Lambda grid override");
  sim->add_option("--extrapolant", sa.extrapolant, "Extrapolant override");
  sim->add_option("--workers", sa.workers, "Worker threads (0 = all cores)");
  sim->add_option("--out", sa.out, "Output file (default: standard output)");
  sim->add_option("--format", sa.format, "csv or json (default from --out extension, else csv)");
  sim->add_option("--digits", sa.digits, "Significant digits in CSV output")->capture_default_str();

  SigmaArgs ga;
  auto* sig = app.add_subcommand("sigma-u", "Estimate Sigma_u from replicate measurements");
  sig->add_option("--input", ga.input, "Input CSV file")->required();
  sig->add_option("--replicates", ga.replicates, "Replicate column pairs 'a1,b1;a2,b2'")->required();
  sig->add_option("--out", ga.out, "Output file (default: standard output)");
  sig->add_option("--format", ga.format, "csv or json");
  sig->add_option("--digits", ga.digits, "Significant digits in CSV output")->capture_default_str();

  TableArgs ta;
  auto* tab = app.add_subcommand("table", "Render a study JSON file as a Mean/Bias/Variance/MSE table");
  tab->add_option("--input", ta.input, "Study JSON written by simulate --format json")->required();
  tab->add_option("--out", ta.out, "Output file (default: standard output)");
  tab->add_option("--digits", ta.digits, "Decimal places")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(Error::Category::Configuration);
  }

  try {
    if (est->parsed()) return cmd_estimate(ea, out, err);
    if (sim->parsed()) return cmd_simulate(sa, out, err);
    if (sig->parsed()) return cmd_sigma_u(ga, out);
    if (tab->parsed()) return cmd_table(ta, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  }
  return static_cast<int>(Error::Category::Configuration);
}

}  // namespace exsimex
