#include "exsimex/simex_classic.hpp"

#include "exsimex/error.hpp"
#include "exsimex/parallel.hpp"

#include <cmath>
#include <sstream>

namespace exsimex {

void SimexConfig::validate() const {
  if (b < 1) throw ConfigError("classical SIMEX needs B >= 1");
  if (static_cast<int>(grid.size()) < coefficient_count(kind))
    throw ConfigError("grid too short for the chosen extrapolant");
}

Eigen::MatrixXd pseudo_data(const Dataset& data, double lambda, Rng& rng) {
  if (!(lambda >= 0.0)) throw ConfigError("pseudo_data: lambda must be non-negative");
  if (lambda == 0.0 || data.error_free()) return data.z();
  return data.z() + std::sqrt(lambda) * normal_rows(rng, data.n(), data.sigma_u());
}

SimexResult classical_simex(const ModelSpec& model, const Dataset& data, const SimexConfig& config) {
  model.validate();
  config.validate();
  const MinimizeResult naive = naive_fit(model, data, config.naive_options);
  if (!naive.converged) throw EstimationError("classical SIMEX: naive fit did not converge");

  const auto k_count = static_cast<Eigen::Index>(config.grid.size());
  const Eigen::Index q = naive.theta_hat.size();
  SimexResult out;
  out.tbar = naive.theta_hat.transpose().replicate(k_count, 1);
  out.tbar_se = Eigen::MatrixXd::Zero(k_count, q);
  out.theta_se = Eigen::VectorXd::Zero(q);
  out.estimate.path = EstimatePath::Extrapolated;
  out.estimate.kind = config.kind;
  out.estimate.naive = Theta::from_flat(naive.theta_hat, model.intercept);

  if (data.error_free()) {
    out.estimate.theta_hat = out.estimate.naive;
    return out;
  }

  EstimationOptions opts = config.naive_options;
  opts.minimize.start = naive.theta_hat;
  const auto b_count = static_cast<std::size_t>(config.b);
  const std::size_t jobs = static_cast<std::size_t>(k_count - 1) * b_count;
  std::vector<Eigen::VectorXd> fits(jobs);
  std::vector<char> ok(jobs, 0);
  parallel_for(
      jobs,
      [&](std::size_t job) {
        const std::size_t k = 1 + job / b_count;
        const std::size_t b = job % b_count;
        Rng rng = keyed_stream(config.seed, {k, b});
        const Dataset pseudo = data.with_surrogates(pseudo_data(data, config.grid.values()[k], rng));
        try {
          const MinimizeResult r = naive_fit(model, pseudo, opts);
          fits[job] = r.theta_hat;
          ok[job] = r.converged ? 1 : 0;
        } catch (const Error&) {
          ok[job] = 0;
        }
      },
      config.workers);

  std::ostringstream bad;
  int failures = 0;
  for (std::size_t job = 0; job < jobs; ++job) {
    if (ok[job]) continue;
    if (failures < 10)
      bad << (failures ? ", " : "") << "(lambda " << config.grid.values()[1 + job / b_count] << ", b "
          << job % b_count << ")";
    ++failures;
  }
  if (failures > 0) {
    std::ostringstream msg;
    msg << "classical SIMEX: " << failures << " pseudo-data fits failed: " << bad.str();
    throw EstimationError(msg.str());
  }

  const auto bd = static_cast<double>(b_count);
  for (Eigen::Index k = 1; k < k_count; ++k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
    for (std::size_t b = 0; b < b_count; ++b) sum += fits[static_cast<std::size_t>(k - 1) * b_count + b];
    const Eigen::VectorXd mean = sum / bd;
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(q);
    for (std::size_t b = 0; b < b_count; ++b)
      ss += (fits[static_cast<std::size_t>(k - 1) * b_count + b] - mean).array().square().matrix();
    out.tbar.row(k) = mean.transpose();
    if (b_count > 1) out.tbar_se.row(k) = (ss / (bd - 1.0) / bd).cwiseSqrt().transpose();
  }

  const Eigen::VectorXd lambdas = config.grid.as_vector();
  FittedExtrapolant fit = fit_extrapolant(lambdas, out.tbar, config.kind);
  const Eigen::VectorXd theta = extrapolate_to_minus_one(fit);

  for (Eigen::Index j = 0; j < q; ++j) {
    double var = 0.0;
    for (Eigen::Index k = 1; k < k_count; ++k) {
      const double se = out.tbar_se(k, j);
      if (se == 0.0) continue;
      const double h = 1e-4 * std::max(1.0, std::abs(out.tbar(k, j)));
      Eigen::MatrixXd col = out.tbar.col(j);
      col(k, 0) += h;
      const double up = extrapolate_to_minus_one(fit_extrapolant(lambdas, col, config.kind))[0];
      col(k, 0) -= 2.0 * h;
      const double down = extrapolate_to_minus_one(fit_extrapolant(lambdas, col, config.kind))[0];
      const double d = (up - down) / (2.0 * h);
      var += d * d * se * se;
    }
    out.theta_se[j] = std::sqrt(var);
  }

  out.estimate.theta_hat = Theta::from_flat(theta, model.intercept);
  GridEstimates grid{config.grid, out.tbar, {}};
  out.estimate.grid = std::move(grid);
  out.estimate.extrapolant = std::move(fit);
  return out;
}

}  // namespace exsimex
