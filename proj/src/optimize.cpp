#include "exsimex/optimize.hpp"

#include "exsimex/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace exsimex {

std::string_view status_name(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::GradTol: return "grad_tol";
    case MinimizeStatus::StepTol: return "step_tol";
    case MinimizeStatus::MaxIters: return "max_iters";
    case MinimizeStatus::Infeasible: return "infeasible";
  }
  return "?";
}

void MinimizeOptions::validate() const {
  if (!(grad_tol > 0.0) || !(step_tol > 0.0) || !(max_step > 0.0))
    throw ConfigError("minimize: tolerances and max_step must be positive");
  if (max_iters < 1) throw ConfigError("minimize: max_iters must be at least 1");
  if (start.size() < 1) throw ConfigError("minimize: empty starting point");
  if (!start.allFinite()) throw ConfigError("minimize: non-finite starting point");
}

Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& steps) {
  if (steps.size() != theta.size()) throw ConfigError("finite_difference_gradient: step size mismatch");
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd x = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = steps[j];
    x[j] = theta[j] + h;
    const double fp = f(x);
    x[j] = theta[j] - h;
    const double fm = f(x);
    x[j] = theta[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      std::ostringstream msg;
      msg << "finite_difference_gradient: non-finite evaluation along coordinate " << j;
      throw EstimationError(msg.str());
    }
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace {

Eigen::VectorXd fd_steps(const Eigen::VectorXd& x) {
  return x.cwiseAbs().unaryExpr([](double v) { return std::max(1e-6, 1e-7 * v); });
}

MinimizeResult infeasible(const Eigen::VectorXd& x, double fx) {
  MinimizeResult r;
  r.theta_hat = x;
  r.value = fx;
  r.grad_norm = std::numeric_limits<double>::infinity();
  r.status = MinimizeStatus::Infeasible;
  return r;
}

struct Evaluated {
  bool ok = false;
  Eigen::VectorXd g;
};

Evaluated eval_gradient(const Objective& f, const std::optional<GradientFn>& g, const Eigen::VectorXd& x) {
  Evaluated e;
  try {
    e.g = g ? (*g)(x) : finite_difference_gradient(f, x, fd_steps(x));
  } catch (const EstimationError&) {
    return e;
  }
  e.ok = e.g.allFinite();
  return e;
}

MinimizeResult quasi_newton(const Objective& f, const std::optional<GradientFn>& g,
                            const MinimizeOptions& opts) {
  const Eigen::Index q = opts.start.size();
  Eigen::VectorXd x = opts.start;
  double fx = f(x);
  if (!std::isfinite(fx)) return infeasible(x, fx);
  Evaluated ge = eval_gradient(f, g, x);
  if (!ge.ok) return infeasible(x, fx);
  Eigen::VectorXd gx = ge.g;

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(q, q);
  bool h_is_identity = true;
  bool first_update = true;

  MinimizeResult r;
  r.status = MinimizeStatus::MaxIters;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (gx.norm() <= opts.grad_tol) {
      r.status = MinimizeStatus::GradTol;
      r.converged = true;
      break;
    }
    Eigen::VectorXd d = -h * gx;
    if (!(gx.dot(d) < 0.0) || !d.allFinite()) {
      h.setIdentity();
      h_is_identity = true;
      d = -gx;
    }
    const double dn = d.norm();
    if (dn > opts.max_step) d *= opts.max_step / dn;

    const double slope = gx.dot(d);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (int k = 0; k < 60; ++k) {
      xn = x + t * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (accepted && t == 1.0) {
      // Full step accepted: try longer ones while they keep paying off
      // (stale inverse-Hessian scale after a region of negative curvature).
      for (double te = 2.0; te * d.norm() <= opts.max_step; te *= 2.0) {
        const Eigen::VectorXd xe = x + te * d;
        const double fe = f(xe);
        if (!(std::isfinite(fe) && fe < fn && fe <= fx + 1e-4 * te * slope)) break;
        xn = xe;
        fn = fe;
      }
    }
    if (!accepted) {
      if (!h_is_identity) {
        h.setIdentity();
        h_is_identity = true;
        continue;
      }
      // No descent along the steepest direction at any resolvable step.
      r.status = MinimizeStatus::StepTol;
      r.converged = gx.norm() <= 1e-4 * (1.0 + std::abs(fx));
      break;
    }
    Evaluated gn = eval_gradient(f, g, xn);
    const Eigen::VectorXd s = xn - x;
    const double step = s.norm();
    const double xnorm = x.norm();
    x = xn;
    fx = fn;
    if (!gn.ok) {
      // Gradient undefined next to the accepted point: stop here.
      r.status = MinimizeStatus::StepTol;
      r.converged = false;
      ++iter;
      break;
    }
    const Eigen::VectorXd y = gn.g - gx;
    gx = gn.g;
    if (step <= opts.step_tol * (1.0 + xnorm)) {
      r.status = gx.norm() <= opts.grad_tol ? MinimizeStatus::GradTol : MinimizeStatus::StepTol;
      r.converged = true;
      ++iter;
      break;
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_update) {
        h = Eigen::MatrixXd::Identity(q, q) * (sy / y.squaredNorm());
        first_update = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q, q);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
      h_is_identity = false;
    } else {
      h.setIdentity();
      h_is_identity = true;
      first_update = true;
    }
  }
  r.theta_hat = x;
  r.value = fx;
  r.grad_norm = gx.norm();
  r.iters = iter;
  return r;
}

MinimizeResult nelder_mead(const Objective& f, const std::optional<GradientFn>& g,
                           const MinimizeOptions& opts) {
  const Eigen::Index q = opts.start.size();
  const auto nv = static_cast<std::size_t>(q + 1);
  double f0 = f(opts.start);
  if (!std::isfinite(f0)) return infeasible(opts.start, f0);

  auto safe = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  Eigen::VectorXd best = opts.start;
  double fbest = f0;
  int iters = 0;
  bool converged = false;

  // A fresh simplex every `refresh` iterations stops the slow crawl of a
  // flattened simplex along a kink.
  const int refresh = 100 * static_cast<int>(nv);
  bool confirmed = false;
  for (int restart = 0; iters < opts.max_iters; ++restart) {
    const int restart_iters = iters;
    std::vector<Eigen::VectorXd> v(nv, best);
    std::vector<double> fv(nv, fbest);
    for (Eigen::Index j = 0; j < q; ++j) {
      const double delta = 0.1 * std::max(std::abs(best[j]), 1.0);
      v[static_cast<std::size_t>(j + 1)][j] += delta;
      fv[static_cast<std::size_t>(j + 1)] = safe(v[static_cast<std::size_t>(j + 1)]);
    }
    converged = false;
    std::vector<std::size_t> order(nv);
    double lowest = fbest;
    int last_gain = iters;
    while (iters < opts.max_iters && iters - restart_iters < refresh) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[nv - 2];
      double diameter = 0.0;
      for (std::size_t k = 0; k < nv; ++k) diameter = std::max(diameter, (v[k] - v[lo]).norm());
      const double spread = fv[hi] - fv[lo];
      const double scale = 1.0 + v[lo].norm();
      if (diameter <= opts.step_tol * scale ||
          (spread <= 1e-15 * (1.0 + std::abs(fv[lo])) && diameter <= 1e-5 * scale)) {
        converged = true;
        break;
      }
      if (fv[lo] < lowest - 1e-13 * (1.0 + std::abs(lowest))) {
        lowest = fv[lo];
        last_gain = iters;
      } else if (iters - last_gain > 50 * static_cast<int>(nv)) {
        // Stuck at a kink with a flattened simplex; the restart re-checks.
        converged = true;
        break;
      }
      ++iters;
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(q);
      for (std::size_t k = 0; k < nv; ++k)
        if (k != hi) centroid += v[k];
      centroid /= static_cast<double>(q);

      const Eigen::VectorXd xr = centroid + (centroid - v[hi]);
      const double fr = safe(xr);
      if (fr < fv[lo]) {
        const Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[hi]);
        const double fe = safe(xe);
        if (fe < fr) {
          v[hi] = xe;
          fv[hi] = fe;
        } else {
          v[hi] = xr;
          fv[hi] = fr;
        }
        continue;
      }
      if (fr < fv[second]) {
        v[hi] = xr;
        fv[hi] = fr;
        continue;
      }
      const bool outside = fr < fv[hi];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (v[hi] - centroid));
      const double fc = safe(xc);
      if (fc < (outside ? fr : fv[hi])) {
        v[hi] = xc;
        fv[hi] = fc;
        continue;
      }
      for (std::size_t k = 0; k < nv; ++k) {
        if (k == lo) continue;
        v[k] = v[lo] + 0.5 * (v[k] - v[lo]);
        fv[k] = safe(v[k]);
      }
    }
    std::size_t lo = 0;
    for (std::size_t k = 1; k < nv; ++k)
      if (fv[k] < fv[lo]) lo = k;
    const bool improved = fv[lo] < fbest - 1e-14 * (1.0 + std::abs(fbest));
    if (fv[lo] <= fbest) {
      best = v[lo];
      fbest = fv[lo];
    }
    if (converged && restart > 0 && !improved) {
      confirmed = true;
      break;
    }
  }
  converged = confirmed;

  MinimizeResult r;
  r.theta_hat = best;
  r.value = fbest;
  r.iters = iters;
  r.converged = converged;
  r.status = converged ? MinimizeStatus::StepTol : MinimizeStatus::MaxIters;
  Evaluated ge = eval_gradient(f, g, best);
  r.grad_norm = ge.ok ? ge.g.norm() : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace

MinimizeResult minimize(const Objective& f, const std::optional<GradientFn>& g,
                        const MinimizeOptions& opts) {
  opts.validate();
  return opts.method == Method::Simplex ? nelder_mead(f, g, opts) : quasi_newton(f, g, opts);
}

}  // namespace exsimex
