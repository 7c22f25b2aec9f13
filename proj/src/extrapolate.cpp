#include "exsimex/extrapolate.hpp"

#include "exsimex/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace exsimex {

namespace {

double parse_double(std::string_view s) {
  std::string str(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number '" + str + "'");
  }
  if (used != str.size()) throw ConfigError("cannot parse number '" + str + "'");
  return v;
}

std::vector<std::string_view> split_view(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(delim, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

LambdaGrid::LambdaGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ConfigError("lambda grid needs at least two points");
  if (values_.front() != 0.0) throw ConfigError("lambda grid must start at 0");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) throw ConfigError("lambda grid has a non-finite value");
    if (k > 0 && !(values_[k] > values_[k - 1])) throw ConfigError("lambda grid must be strictly increasing");
  }
}

LambdaGrid LambdaGrid::equally_spaced(double upper, int count) {
  if (count < 2 || !(upper > 0.0)) throw ConfigError("equally spaced grid needs count >= 2 and upper > 0");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = upper * k / (count - 1);
  v.back() = upper;
  return LambdaGrid(std::move(v));
}

LambdaGrid LambdaGrid::parse(std::string_view text) {
  if (text.find(':') != std::string_view::npos) {
    auto parts = split_view(text, ':');
    if (parts.size() != 3) throw ConfigError("grid range must look like lo:hi:K");
    const double lo = parse_double(parts[0]);
    const double hi = parse_double(parts[1]);
    const double k = parse_double(parts[2]);
    if (lo != 0.0) throw ConfigError("lambda grid must start at 0");
    if (k != std::floor(k)) throw ConfigError("grid count must be an integer");
    return equally_spaced(hi, static_cast<int>(k));
  }
  std::vector<double> v;
  for (auto part : split_view(text, ',')) v.push_back(parse_double(part));
  return LambdaGrid(std::move(v));
}

Eigen::VectorXd LambdaGrid::as_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(values_.size()));
}

std::string_view extrapolant_name(ExtrapolantKind k) {
  switch (k) {
    case ExtrapolantKind::Linear: return "linear";
    case ExtrapolantKind::Quadratic: return "quadratic";
    case ExtrapolantKind::RationalLinear: return "rational";
  }
  return "?";
}

ExtrapolantKind parse_extrapolant(std::string_view name) {
  if (name == "linear") return ExtrapolantKind::Linear;
  if (name == "quadratic") return ExtrapolantKind::Quadratic;
  if (name == "rational" || name == "rational-linear") return ExtrapolantKind::RationalLinear;
  throw ConfigError("unknown extrapolant '" + std::string(name) + "'");
}

int coefficient_count(ExtrapolantKind k) { return k == ExtrapolantKind::Linear ? 2 : 3; }

PointDiagnostics summarize_minimization(const MinimizeResult& r) {
  return {r.value, r.grad_norm, r.iters, r.converged, r.status};
}

double FittedExtrapolant::evaluate(Eigen::Index j, double lambda) const {
  const auto g = gamma.row(j);
  switch (kind) {
    case ExtrapolantKind::Linear: return g[0] + g[1] * lambda;
    case ExtrapolantKind::Quadratic: return g[0] + g[1] * lambda + g[2] * lambda * lambda;
    case ExtrapolantKind::RationalLinear: return g[0] + g[1] / (g[2] + lambda);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Eigen::VectorXd linear_closed_form(const Dataset& data, double lambda, bool intercept) {
  const auto n = static_cast<double>(data.n());
  Eigen::MatrixXd zc = data.z();
  Eigen::VectorXd yc = data.y();
  Eigen::RowVectorXd zbar = Eigen::RowVectorXd::Zero(data.p());
  double ybar = 0.0;
  if (intercept) {
    zbar = zc.colwise().mean();
    ybar = yc.mean();
    zc.rowwise() -= zbar;
    yc.array() -= ybar;
  }
  const Eigen::MatrixXd szz = zc.transpose() * zc / n;
  const Eigen::VectorXd syz = zc.transpose() * yc / n;
  const Eigen::MatrixXd m = szz + lambda * data.sigma_u();
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any())
    throw EstimationError("ill-posed correction: S_zz + lambda * Sigma_u is not positive definite");
  const Eigen::VectorXd beta = llt.solve(syz);
  if (!intercept) return beta;
  Eigen::VectorXd out(beta.size() + 1);
  out[0] = ybar - zbar.dot(beta);
  out.tail(beta.size()) = beta;
  return out;
}

Eigen::VectorXd default_start(const ModelSpec& model, const Dataset& data) {
  const Eigen::Index q = model.parameter_count(data.p());
  switch (model.family) {
    case Family::Linear:
    case Family::Quantile:
    case Family::Expectile:
    case Family::Walsh: {
      Dataset plain = data.with_sigma_u(Eigen::MatrixXd::Zero(data.p(), data.p()));
      try {
        return linear_closed_form(plain, 0.0, model.intercept);
      } catch (const EstimationError&) {
        return Eigen::VectorXd::Zero(q);
      }
    }
    case Family::LPRE:
    case Family::LARE: {
      Dataset logged(data.y().array().log().matrix(), data.z(), Eigen::MatrixXd::Zero(data.p(), data.p()));
      try {
        return linear_closed_form(logged, 0.0, false);
      } catch (const EstimationError&) {
        return Eigen::VectorXd::Zero(q);
      }
    }
    case Family::GenericLS:
      if (model.mean_fn->default_start) return model.mean_fn->default_start(data);
      throw ConfigError("generic-ls needs an explicit starting value");
    default:
      return Eigen::VectorXd::Zero(q);
  }
}

MinimizeResult minimize_target(const ModelSpec& model, const Dataset& data, double lambda,
                               const Eigen::VectorXd& start, const EstimationOptions& opts) {
  TargetContext ctx(data, model, lambda, opts.quadrature);
  MinimizeOptions mo = opts.minimize;
  mo.start = start;
  Objective f = [&ctx](const Eigen::VectorXd& t) { return target_value(ctx, t); };
  std::optional<GradientFn> g;
  if (has_analytic_gradient(model.family))
    g = [&ctx](const Eigen::VectorXd& t) { return target_gradient(ctx, t); };
  const bool kinked = lambda == 0.0 || data.error_free();
  if (kinked && model.nonsmooth_at_zero()) {
    mo.method = Method::Simplex;
    mo.max_iters = std::max<int>(mo.max_iters, 1000 * static_cast<int>(start.size()));
  }
  return minimize(f, g, mo);
}

MinimizeResult continuation_minimize(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& naive,
                                     const EstimationOptions& opts) {
  if (!(opts.continuation_step > 0.0 && opts.continuation_step <= 1.0))
    throw ConfigError("continuation_step must lie in (0, 1]");
  if (!(opts.branch_radius > 0.0)) throw ConfigError("branch_radius must be positive");
  constexpr double kMinStep = 1.0 / 1024.0;
  double lambda = 0.0;
  double step = opts.continuation_step;
  Eigen::VectorXd theta = naive;
  MinimizeResult last;
  while (lambda > -1.0) {
    const double next = std::max(lambda - step, -1.0);
    MinimizeResult r = minimize_target(model, data, next, theta, opts);
    const double move = (r.theta_hat - theta).norm();
    if (r.converged && move <= opts.branch_radius * (1.0 + theta.norm())) {
      theta = r.theta_hat;
      lambda = next;
      last = std::move(r);
      step = std::min(2.0 * step, opts.continuation_step);
      continue;
    }
    step /= 2.0;
    if (step < kMinStep) {
      std::ostringstream msg;
      msg << "local minimizer lost near lambda = " << lambda << " (no minimum continues the naive estimate to -1";
      if (!r.converged) msg << "; status " << status_name(r.status);
      msg << ")";
      throw EstimationError(msg.str());
    }
  }
  return last;
}

MinimizeResult naive_fit(const ModelSpec& model, const Dataset& data, const EstimationOptions& opts) {
  const Eigen::VectorXd start =
      opts.minimize.start.size() > 0 ? opts.minimize.start : default_start(model, data);
  if (model.family == Family::Linear) {
    // Closed form, with the numeric diagnostics of the same point.
    MinimizeResult r = minimize_target(model, data, 0.0, linear_closed_form(data, 0.0, model.intercept), opts);
    r.theta_hat = linear_closed_form(data, 0.0, model.intercept);
    return r;
  }
  return minimize_target(model, data, 0.0, start, opts);
}

EstimateResult direct_estimate(const ModelSpec& model, const Dataset& data, const EstimationOptions& opts) {
  model.validate();
  if (!model.pluggable())
    throw ConfigError("family '" + std::string(family_name(model.family)) +
                      "' cannot be evaluated at lambda = -1; use the lambda-grid path (grid_estimate)");
  const MinimizeResult naive = naive_fit(model, data, opts);
  if (!naive.converged) throw EstimationError("naive fit did not converge");

  EstimateResult out;
  out.path = EstimatePath::Direct;
  out.naive = Theta::from_flat(naive.theta_hat, model.intercept);

  if (data.error_free()) {
    // The lambda = -1 target coincides with the naive one.
    out.theta_hat = out.naive;
    out.direct = summarize_minimization(naive);
    return out;
  }
  if (model.family == Family::Linear ||
      (model.family == Family::Expectile && model.tau && *model.tau == 0.5)) {
    const Eigen::VectorXd closed = linear_closed_form(data, -1.0, model.intercept);
    const MinimizeResult numeric = minimize_target(model, data, -1.0, naive.theta_hat, opts);
    const double gap = (numeric.theta_hat - closed).norm();
    if (!numeric.converged || gap > 1e-6 * (1.0 + closed.norm())) {
      std::ostringstream msg;
      msg << "closed-form and numeric linear corrections disagree (gap " << gap << ")";
      throw EstimationError(msg.str());
    }
    out.theta_hat = Theta::from_flat(closed, model.intercept);
    out.direct = summarize_minimization(numeric);
    return out;
  }
  const MinimizeResult r = continuation_minimize(model, data, naive.theta_hat, opts);
  out.theta_hat = Theta::from_flat(r.theta_hat, model.intercept);
  out.direct = summarize_minimization(r);
  return out;
}

GridEstimates grid_estimate(const ModelSpec& model, const Dataset& data, const LambdaGrid& grid,
                            const EstimationOptions& opts) {
  model.validate();
  const Eigen::Index q = model.parameter_count(data.p());
  GridEstimates out{grid, Eigen::MatrixXd(static_cast<Eigen::Index>(grid.size()), q), {}};
  out.diagnostics.reserve(grid.size());

  const MinimizeResult naive = naive_fit(model, data, opts);
  out.thetas.row(0) = naive.theta_hat.transpose();
  out.diagnostics.push_back(summarize_minimization(naive));

  Eigen::VectorXd previous = naive.theta_hat;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double lambda = grid.values()[k];
    MinimizeResult r;
    if (model.family == Family::Linear) {
      const Eigen::VectorXd closed = linear_closed_form(data, lambda, model.intercept);
      r = minimize_target(model, data, lambda, closed, opts);
      r.theta_hat = closed;
    } else {
      r = minimize_target(model, data, lambda, opts.warm_start ? previous : naive.theta_hat, opts);
    }
    out.thetas.row(static_cast<Eigen::Index>(k)) = r.theta_hat.transpose();
    out.diagnostics.push_back(summarize_minimization(r));
    previous = r.theta_hat;
  }

  std::ostringstream bad;
  bool failed = false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!out.diagnostics[k].converged) {
      bad << (failed ? ", " : "") << grid.values()[k] << " (" << status_name(out.diagnostics[k].status) << ")";
      failed = true;
    }
  }
  if (failed) throw EstimationError("grid minimization did not converge at lambda = " + bad.str());
  return out;
}

namespace {

Eigen::MatrixXd polynomial_design(const Eigen::VectorXd& lambdas, int degree) {
  Eigen::MatrixXd x(lambdas.size(), degree + 1);
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    double pw = 1.0;
    for (int d = 0; d <= degree; ++d) {
      x(k, d) = pw;
      pw *= lambdas[k];
    }
  }
  return x;
}

struct RationalFit {
  Eigen::Vector3d gamma;
  double rss = std::numeric_limits<double>::infinity();
};

double rational_rss(const Eigen::VectorXd& l, const Eigen::VectorXd& t, const Eigen::Vector3d& g) {
  double rss = 0.0;
  for (Eigen::Index k = 0; k < l.size(); ++k) {
    const double den = g[2] + l[k];
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    const double r = t[k] - (g[0] + g[1] / den);
    rss += r * r;
  }
  return rss;
}

// Given c, the best (a, b) is a linear least-squares problem.
RationalFit rational_given_c(const Eigen::VectorXd& l, const Eigen::VectorXd& t, double c) {
  RationalFit f;
  if (!((c + l.minCoeff()) > 0.0)) return f;
  Eigen::MatrixXd x(l.size(), 2);
  x.col(0).setOnes();
  x.col(1) = (l.array() + c).inverse().matrix();
  const Eigen::Vector2d ab = (x.transpose() * x).ldlt().solve(x.transpose() * t);
  f.gamma << ab[0], ab[1], c;
  f.rss = rational_rss(l, t, f.gamma);
  return f;
}

RationalFit fit_rational(const Eigen::VectorXd& l, const Eigen::VectorXd& t, const Eigen::Vector3d& quad) {
  std::vector<RationalFit> seeds;
  // Match value, slope and curvature of the quadratic trend at lambda = 1.
  const double q1 = quad[1] + 2.0 * quad[2];
  const double q2 = 2.0 * quad[2];
  if (q2 != 0.0) {
    const double shift = -2.0 * q1 / q2;  // c + 1
    if (std::isfinite(shift) && shift > 0.0) {
      const double c = shift - 1.0;
      const double b = -q1 * shift * shift;
      const double a = (quad[0] + quad[1] + quad[2]) - b / shift;
      Eigen::Vector3d g(a, b, c);
      seeds.push_back({g, rational_rss(l, t, g)});
    }
  }
  const double span = l.maxCoeff() + 1.0;
  for (double c : {span, 2.0 * span, 10.0 * span, 100.0 * span}) seeds.push_back(rational_given_c(l, t, c));
  RationalFit best = *std::min_element(seeds.begin(), seeds.end(),
                                       [](const RationalFit& a, const RationalFit& b) { return a.rss < b.rss; });
  if (!std::isfinite(best.rss)) return best;

  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  Objective f = [&](const Eigen::VectorXd& g) { return rational_rss(l, t, g) / (scale * scale); };
  GradientFn grad = [&](const Eigen::VectorXd& g) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(3);
    for (Eigen::Index k = 0; k < l.size(); ++k) {
      const double den = g[2] + l[k];
      const double r = t[k] - (g[0] + g[1] / den);
      out[0] += -2.0 * r;
      out[1] += -2.0 * r / den;
      out[2] += 2.0 * r * g[1] / (den * den);
    }
    return Eigen::VectorXd(out / (scale * scale));
  };
  MinimizeOptions mo;
  mo.start = best.gamma;
  mo.grad_tol = 1e-14;
  mo.step_tol = 1e-14;
  mo.max_iters = 2000;
  mo.max_step = 10.0 * std::max(1.0, best.gamma.cwiseAbs().maxCoeff());
  const MinimizeResult r = minimize(f, grad, mo);
  Eigen::Vector3d g = r.theta_hat;
  double rss = rational_rss(l, t, g);
  if (!(rss <= best.rss)) {
    g = best.gamma;
    rss = best.rss;
  }

  // Gauss-Newton polish.
  for (int it = 0; it < 50 && rss > 0.0; ++it) {
    Eigen::MatrixXd j(l.size(), 3);
    Eigen::VectorXd res(l.size());
    for (Eigen::Index k = 0; k < l.size(); ++k) {
      const double den = g[2] + l[k];
      res[k] = t[k] - (g[0] + g[1] / den);
      j(k, 0) = 1.0;
      j(k, 1) = 1.0 / den;
      j(k, 2) = -g[1] / (den * den);
    }
    const Eigen::Vector3d delta = j.colPivHouseholderQr().solve(res);
    if (!delta.allFinite()) break;
    bool improved = false;
    for (double step = 1.0; step > 1e-6; step *= 0.5) {
      const Eigen::Vector3d cand = g + step * delta;
      const double cr = rational_rss(l, t, cand);
      if (cr < rss) {
        g = cand;
        rss = cr;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return {g, rss};
}

}  // namespace

FittedExtrapolant fit_extrapolant(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& thetas,
                                  ExtrapolantKind kind) {
  const int d = coefficient_count(kind);
  if (lambdas.size() != thetas.rows()) throw ConfigError("fit_extrapolant: grid and estimates disagree in size");
  if (lambdas.size() < d) {
    std::ostringstream msg;
    msg << extrapolant_name(kind) << " extrapolant needs at least " << d << " grid points";
    throw ConfigError(msg.str());
  }
  FittedExtrapolant fit;
  fit.kind = kind;
  fit.gamma.resize(thetas.cols(), 3);
  fit.gamma.setZero();
  if (kind == ExtrapolantKind::Linear) fit.gamma.resize(thetas.cols(), 2);
  fit.rss.resize(thetas.cols());

  const Eigen::MatrixXd x2 = polynomial_design(lambdas, 2);
  const Eigen::MatrixXd x1 = polynomial_design(lambdas, 1);
  for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
    const Eigen::VectorXd t = thetas.col(j);
    if (kind == ExtrapolantKind::Linear) {
      const Eigen::VectorXd c = (x1.transpose() * x1).ldlt().solve(x1.transpose() * t);
      fit.gamma.row(j) = c.transpose();
      fit.rss[j] = (t - x1 * c).squaredNorm();
      continue;
    }
    const Eigen::VectorXd c = (x2.transpose() * x2).ldlt().solve(x2.transpose() * t);
    if (kind == ExtrapolantKind::Quadratic) {
      fit.gamma.row(j) = c.transpose();
      fit.rss[j] = (t - x2 * c).squaredNorm();
      continue;
    }
    const RationalFit r = fit_rational(lambdas, t, Eigen::Vector3d(c[0], c[1], c[2]));
    if (!std::isfinite(r.rss)) throw EstimationError("rational extrapolant fit failed; try the quadratic extrapolant");
    if (!(r.gamma[2] > 1.0)) {
      std::ostringstream msg;
      msg << "rational extrapolant for coordinate " << j << " has its pole at lambda = " << -r.gamma[2]
          << ", inside [-1, " << lambdas.maxCoeff() << "]; use the quadratic extrapolant";
      throw EstimationError(msg.str());
    }
    fit.gamma.row(j) = r.gamma.transpose();
    fit.rss[j] = r.rss;
  }
  return fit;
}

FittedExtrapolant fit_extrapolant(const GridEstimates& estimates, ExtrapolantKind kind) {
  return fit_extrapolant(estimates.grid.as_vector(), estimates.thetas, kind);
}

Eigen::VectorXd extrapolate_to_minus_one(const FittedExtrapolant& fit) {
  Eigen::VectorXd out(fit.gamma.rows());
  for (Eigen::Index j = 0; j < fit.gamma.rows(); ++j) {
    if (fit.kind == ExtrapolantKind::RationalLinear && !(fit.gamma(j, 2) > 1.0))
      throw EstimationError("rational extrapolant has a pole in [-1, 0]; use the quadratic extrapolant");
    out[j] = fit.evaluate(j, -1.0);
  }
  return out;
}

EstimateResult ex_estimate(const ModelSpec& model, const Dataset& data, const ExConfig& config) {
  model.validate();
  if (model.pluggable() && !config.force_grid) return direct_estimate(model, data, config.options);
  EstimateResult out;
  out.path = EstimatePath::Extrapolated;
  out.kind = config.kind;
  GridEstimates grid = grid_estimate(model, data, config.grid, config.options);
  FittedExtrapolant fit = fit_extrapolant(grid, config.kind);
  out.theta_hat = Theta::from_flat(extrapolate_to_minus_one(fit), model.intercept);
  out.naive = Theta::from_flat(grid.thetas.row(0).transpose(), model.intercept);
  out.grid = std::move(grid);
  out.extrapolant = std::move(fit);
  return out;
}

}  // namespace exsimex
