#include "exsimex/targets.hpp"

#include "exsimex/error.hpp"
#include "exsimex/optimize.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace exsimex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double safe_exp(double x) { return x > kExpOverflow ? kInf : std::exp(x); }

bool forbids_negative_lambda(const ModelSpec& m) { return !m.pluggable(); }

void check_family_data(const Dataset& d, const ModelSpec& m) {
  const Eigen::VectorXd& y = d.y();
  auto fail = [&](const std::string& why) {
    throw InputError("model mismatch for family '" + std::string(family_name(m.family)) + "': " + why);
  };
  switch (m.family) {
    case Family::Poisson:
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] < 0.0 || y[i] != std::floor(y[i])) fail("responses must be non-negative integers");
      break;
    case Family::Logistic:
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) fail("responses must be 0 or 1");
      break;
    case Family::LPRE:
    case Family::LARE:
      if (!(y.array() > 0.0).all()) fail("responses must be strictly positive");
      break;
    default:
      break;
  }
}

}  // namespace

Eigen::VectorXd Theta::flat() const {
  if (!intercept) return coefficients;
  Eigen::VectorXd out(coefficients.size() + 1);
  out[0] = *intercept;
  out.tail(coefficients.size()) = coefficients;
  return out;
}

Theta Theta::from_flat(const Eigen::VectorXd& flat, bool has_intercept) {
  Theta t;
  if (has_intercept) {
    t.intercept = flat[0];
    t.coefficients = flat.tail(flat.size() - 1);
  } else {
    t.coefficients = flat;
  }
  return t;
}

std::string coordinate_name(Eigen::Index flat_index, bool has_intercept) {
  if (has_intercept) {
    if (flat_index == 0) return "alpha";
    return "beta" + std::to_string(flat_index);
  }
  return "beta" + std::to_string(flat_index + 1);
}

Eigen::VectorXd default_fd_steps(const Eigen::VectorXd& theta) {
  return theta.cwiseAbs().unaryExpr([](double v) { return std::max(1e-6, 1e-7 * v); });
}

TargetContext::TargetContext(const Dataset& data, const ModelSpec& model, double lambda,
                             QuadratureOptions quad)
    : data_(&data), model_(model), lambda_(lambda), quad_(quad) {
  model_.validate();
  if (!std::isfinite(lambda) || lambda < -1.0) throw ConfigError("lambda must be finite and >= -1");
  if (lambda < 0.0 && forbids_negative_lambda(model_))
    throw ConfigError("family '" + std::string(family_name(model_.family)) +
                      "' cannot be evaluated at negative lambda; use the lambda-grid path");
  if (quad_.scalar_nodes < 2 || quad_.tensor_nodes < 2)
    throw ConfigError("quadrature needs at least 2 nodes");
  check_family_data(data, model_);
  if (model_.family == Family::Walsh && data.n() > kWalshPairCap) {
    std::ostringstream msg;
    msg << "walsh target is evaluated exactly over all pairs; n = " << data.n()
        << " exceeds the cap of " << kWalshPairCap;
    throw ConfigError(msg.str());
  }
  if (model_.family == Family::GenericLS) {
    const Eigen::Index p = data.p();
    if (p > kTensorDimCap)
      throw ConfigError("generic least squares supports at most 3 error-prone covariates");
    if (model_.mean_fn->p != p) throw ConfigError("mean function dimension does not match the data");
    if (lambda_ > 0.0 && !data.error_free()) {
      Eigen::MatrixXd root;
      Eigen::LLT<Eigen::MatrixXd> llt(data.sigma_u());
      if (llt.info() == Eigen::Success) {
        root = llt.matrixL();
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(data.sigma_u());
        root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
      }
      const auto rule = gauss_hermite_rule(quad_.tensor_nodes);
      const auto m = static_cast<Eigen::Index>(rule->nodes.size());
      Eigen::Index total = 1;
      for (Eigen::Index j = 0; j < p; ++j) total *= m;
      offsets_.resize(p, total);
      offset_weights_.resize(total);
      const double norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(p));
      Eigen::VectorXd t(p);
      for (Eigen::Index k = 0; k < total; ++k) {
        Eigen::Index rem = k;
        double w = norm;
        for (Eigen::Index j = 0; j < p; ++j) {
          const auto idx = static_cast<std::size_t>(rem % m);
          rem /= m;
          t[j] = std::sqrt(2.0) * rule->nodes[idx];
          w *= rule->weights[idx];
        }
        offsets_.col(k) = std::sqrt(lambda_) * root * t;
        offset_weights_[k] = w;
      }
    }
  }
}

Eigen::VectorXd TargetContext::slope(const Eigen::VectorXd& theta) const {
  if (theta.size() != parameter_count()) throw ConfigError("theta has the wrong length");
  return model_.intercept ? Eigen::VectorXd(theta.tail(theta.size() - 1)) : theta;
}

Eigen::VectorXd TargetContext::linear_index(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd eta = data_->z() * slope(theta);
  if (model_.intercept) eta.array() += theta[0];
  return eta;
}

double TargetContext::noise_variance(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd b = slope(theta);
  return lambda_ * b.dot(data_->sigma_u() * b);
}

double target_linear(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd r = ctx.data().y() - ctx.linear_index(theta);
  return r.squaredNorm() / static_cast<double>(r.size()) + ctx.noise_variance(theta);
}

double target_exponential(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd& y = ctx.data().y();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e1 = a[i] + 0.5 * s;
    const double e2 = 2.0 * a[i] + 2.0 * s;
    if (e1 > kExpOverflow || e2 > kExpOverflow) return kInf;
    acc += y[i] * y[i] - 2.0 * y[i] * std::exp(e1) + std::exp(e2);
  }
  return acc / static_cast<double>(y.size());
}

Eigen::VectorXd target_exponential_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd st = ctx.lambda() * (ctx.data().sigma_u() * theta);
  const Eigen::VectorXd& y = ctx.data().y();
  const Eigen::MatrixXd& z = ctx.data().z();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e1 = a[i] + 0.5 * s;
    const double e2 = 2.0 * a[i] + 2.0 * s;
    if (e1 > kExpOverflow || e2 > kExpOverflow) return Eigen::VectorXd::Constant(theta.size(), kInf);
    const Eigen::VectorXd zi = z.row(i).transpose();
    g += -2.0 * y[i] * std::exp(e1) * (zi + st) + std::exp(e2) * (2.0 * zi + 4.0 * st);
  }
  return g / static_cast<double>(y.size());
}

double target_sine(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  if (-2.0 * s > kExpOverflow) return kInf;
  const double damp1 = std::exp(-0.5 * s);
  const double damp2 = std::exp(-2.0 * s);
  const Eigen::VectorXd& y = ctx.data().y();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    acc += y[i] * y[i] - 2.0 * y[i] * std::sin(a[i]) * damp1 - 0.5 * std::cos(2.0 * a[i]) * damp2;
  // The +1 (rather than the exact +1/2) only shifts the value, not the minimizer.
  return acc / static_cast<double>(y.size()) + 1.0;
}

double target_poisson_negloglik(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd& y = ctx.data().y();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = a[i] + 0.5 * s;
    if (e > kExpOverflow) return kInf;
    acc += y[i] * a[i] - std::exp(e);
  }
  return -acc / static_cast<double>(y.size());
}

namespace {

Eigen::VectorXd poisson_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd st = ctx.lambda() * (ctx.data().sigma_u() * theta);
  const Eigen::VectorXd& y = ctx.data().y();
  const Eigen::MatrixXd& z = ctx.data().z();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = a[i] + 0.5 * s;
    if (e > kExpOverflow) return Eigen::VectorXd::Constant(theta.size(), kInf);
    const Eigen::VectorXd zi = z.row(i).transpose();
    g += y[i] * zi - std::exp(e) * (zi + st);
  }
  return -g / static_cast<double>(y.size());
}

Eigen::VectorXd lpre_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  if (0.5 * s > kExpOverflow) return Eigen::VectorXd::Constant(theta.size(), kInf);
  const double factor = std::exp(0.5 * s);
  const Eigen::VectorXd st = ctx.lambda() * (ctx.data().sigma_u() * theta);
  const Eigen::VectorXd& y = ctx.data().y();
  const Eigen::MatrixXd& z = ctx.data().z();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  double level = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(a[i]) > kExpOverflow) return Eigen::VectorXd::Constant(theta.size(), kInf);
    const double down = y[i] * std::exp(-a[i]);
    const double up = std::exp(a[i]) / y[i];
    level += down + up;
    g += (up - down) * z.row(i).transpose();
  }
  const auto n = static_cast<double>(y.size());
  return factor * (g / n + (level / n) * st);
}

Eigen::VectorXd linear_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd r = ctx.data().y() - ctx.linear_index(theta);
  const auto n = static_cast<double>(r.size());
  const Eigen::VectorXd b = ctx.slope(theta);
  Eigen::VectorXd gb = -2.0 * ctx.data().z().transpose() * r / n + 2.0 * ctx.lambda() * (ctx.data().sigma_u() * b);
  if (!ctx.model().intercept) return gb;
  Eigen::VectorXd g(theta.size());
  g[0] = -2.0 * r.sum() / n;
  g.tail(gb.size()) = gb;
  return g;
}

}  // namespace

double target_logistic(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd& y = ctx.data().y();
  double acc = 0.0;
  if (s < kSmallVariance) {
    for (Eigen::Index i = 0; i < y.size(); ++i) acc += y[i] * eta[i] - softplus(eta[i]);
  } else {
    const auto rule = gauss_hermite_rule(ctx.quadrature().scalar_nodes);
    const double scale = std::sqrt(2.0 * s);
    const double norm = 1.0 / std::sqrt(std::numbers::pi);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double integral = 0.0;
      for (std::size_t k = 0; k < rule->nodes.size(); ++k)
        integral += rule->weights[k] * softplus(eta[i] + scale * rule->nodes[k]);
      acc += y[i] * eta[i] - norm * integral;
    }
  }
  return -acc / static_cast<double>(y.size());
}

double target_lpre(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd& y = ctx.data().y();
  if (0.5 * s > kExpOverflow) return kInf;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(a[i]) > kExpOverflow) return kInf;
    acc += y[i] * std::exp(-a[i]) + std::exp(a[i]) / y[i];
  }
  return acc / static_cast<double>(y.size()) * std::exp(0.5 * s);
}

double target_lare(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd a = ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::VectorXd& y = ctx.data().y();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(a[i]) + 0.5 * s > kExpOverflow) return kInf;
    const double up = std::exp(a[i]) / y[i];
    const double down = y[i] * std::exp(-a[i]);
    if (s < kSmallVariance) {
      const double gap = std::abs(y[i] - std::exp(a[i]));
      acc += gap / y[i] + std::exp(-a[i]) * gap;
      continue;
    }
    // l = log(y e^{-a}); for V ~ N(0, s):
    //   E[e^V; V < l] = e^{s/2} Phi(l - s),  E[e^{-V}; V < l] = e^{s/2} Phi(l + s).
    const double l = std::log(y[i]) - a[i];
    const double g = std::exp(0.5 * s);
    acc += up * g * (1.0 - 2.0 * normal_cdf(l - s, 0.0, s)) +
           down * g * (2.0 * normal_cdf(l + s, 0.0, s) - 1.0);
  }
  return acc / static_cast<double>(y.size());
}

double target_quantile(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const double tau = *ctx.model().tau;
  const Eigen::VectorXd xi = ctx.data().y() - ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  double acc = 0.0;
  if (s < kSmallVariance) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) acc += xi[i] * (tau - (xi[i] < 0.0 ? 1.0 : 0.0));
  } else {
    for (Eigen::Index i = 0; i < xi.size(); ++i)
      acc += (tau - 1.0) * xi[i] + xi[i] * normal_cdf(xi[i], 0.0, s) + s * normal_pdf(xi[i], 0.0, s);
  }
  return acc / static_cast<double>(xi.size());
}

double target_walsh(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd xi = ctx.data().y() - ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  const Eigen::Index n = xi.size();
  double diag = 0.0;
  double pairs = 0.0;
  if (s < kSmallVariance) {
    for (Eigen::Index i = 0; i < n; ++i) diag += 2.0 * std::abs(xi[i]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) pairs += std::abs(xi[i] + xi[j]);
  } else {
    // E|x - W| = x (2 Phi(x; 0, v) - 1) + 2 v phi(x; 0, v) for W ~ N(0, v).
    const double v2 = 2.0 * s;
    const double inv_sd1 = 1.0 / std::sqrt(2.0 * s);
    const double inv_sd2 = 1.0 / std::sqrt(2.0 * v2);
    const double c1 = 1.0 / std::sqrt(2.0 * std::numbers::pi * s);
    const double c2 = 1.0 / std::sqrt(2.0 * std::numbers::pi * v2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = xi[i];
      const double big_phi = 0.5 * std::erfc(-x * inv_sd1);
      const double small_phi = c1 * std::exp(-0.5 * x * x / s);
      diag += 2.0 * (x * (2.0 * big_phi - 1.0) + 2.0 * s * small_phi);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double x = xi[i] + xi[j];
        const double big_phi = 0.5 * std::erfc(-x * inv_sd2);
        const double small_phi = c2 * std::exp(-0.5 * x * x / v2);
        pairs += x * (2.0 * big_phi - 1.0) + 2.0 * v2 * small_phi;
      }
    }
  }
  const auto nd = static_cast<double>(n);
  return (diag + pairs) / (2.0 * nd * (nd + 1.0));
}

double target_expectile(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const double tau = *ctx.model().tau;
  const Eigen::VectorXd xi = ctx.data().y() - ctx.linear_index(theta);
  const double s = ctx.noise_variance(theta);
  double acc = 0.0;
  if (tau == 0.5) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) acc += 0.5 * (xi[i] * xi[i] + s);
  } else if (s < kSmallVariance) {
    for (Eigen::Index i = 0; i < xi.size(); ++i)
      acc += xi[i] * xi[i] * (xi[i] < 0.0 ? 1.0 - tau : tau);
  } else {
    const double k = 2.0 * tau - 1.0;
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
      const double x = xi[i];
      const double big_phi = normal_cdf(x, 0.0, s);
      const double small_phi = normal_pdf(x, 0.0, s);
      acc += k * x * x * big_phi + k * s * x * small_phi + k * s * big_phi + (1.0 - tau) * (x * x + s);
    }
  }
  return acc / static_cast<double>(xi.size());
}

double target_generic_ls(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  const auto& m = *ctx.model().mean_fn;
  if (theta.size() != m.q) throw ConfigError("theta has the wrong length for the mean function");
  const Eigen::VectorXd& y = ctx.data().y();
  const Eigen::MatrixXd& z = ctx.data().z();
  const Eigen::MatrixXd& off = ctx.tensor_offsets();
  const Eigen::VectorXd& w = ctx.tensor_weights();
  const bool point_mass = off.cols() == 0;
  double acc = 0.0;
  Eigen::VectorXd x(z.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const Eigen::VectorXd zi = z.row(i).transpose();
    if (point_mass) {
      const double r = y[i] - m.value(zi, theta);
      if (!std::isfinite(r)) return kInf;
      acc += r * r;
      continue;
    }
    double inner = 0.0;
    for (Eigen::Index k = 0; k < off.cols(); ++k) {
      x = zi + off.col(k);
      const double r = y[i] - m.value(x, theta);
      if (!std::isfinite(r)) return kInf;
      inner += w[k] * r * r;
    }
    acc += inner;
  }
  return acc / static_cast<double>(y.size());
}

double target_value(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  switch (ctx.model().family) {
    case Family::Linear: return target_linear(ctx, theta);
    case Family::Exponential: return target_exponential(ctx, theta);
    case Family::Sine: return target_sine(ctx, theta);
    case Family::Poisson: return target_poisson_negloglik(ctx, theta);
    case Family::Logistic: return target_logistic(ctx, theta);
    case Family::LPRE: return target_lpre(ctx, theta);
    case Family::LARE: return target_lare(ctx, theta);
    case Family::Quantile: return target_quantile(ctx, theta);
    case Family::Walsh: return target_walsh(ctx, theta);
    case Family::Expectile: return target_expectile(ctx, theta);
    case Family::GenericLS: return target_generic_ls(ctx, theta);
  }
  return kInf;
}

bool has_analytic_gradient(Family family) {
  return family == Family::Linear || family == Family::Exponential || family == Family::Poisson ||
         family == Family::LPRE;
}

Eigen::VectorXd target_gradient(const TargetContext& ctx, const Eigen::VectorXd& theta) {
  switch (ctx.model().family) {
    case Family::Linear: return linear_gradient(ctx, theta);
    case Family::Exponential: return target_exponential_gradient(ctx, theta);
    case Family::Poisson: return poisson_gradient(ctx, theta);
    case Family::LPRE: return lpre_gradient(ctx, theta);
    default: break;
  }
  return finite_difference_gradient([&](const Eigen::VectorXd& t) { return target_value(ctx, t); },
                                    theta, default_fd_steps(theta));
}

}  // namespace exsimex
