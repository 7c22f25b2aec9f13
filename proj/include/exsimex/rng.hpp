#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace exsimex {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic generator for the stream identified by (seed, keys...).
/// Streams with different keys are statistically independent, so results do
/// not depend on the order in which work items run.
using Rng = std::mt19937_64;

inline Rng keyed_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(mix64(h)), static_cast<std::uint32_t>(mix64(h) >> 32)};
  return Rng(seq);
}

/// n x cols matrix of independent standard normals.
inline Eigen::MatrixXd standard_normal_matrix(Rng& rng, Eigen::Index n, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(n, cols);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

/// Square root R of a PSD matrix with R R' = a (Cholesky when possible).
inline Eigen::MatrixXd psd_root(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Rows ~ N(0, cov).
inline Eigen::MatrixXd normal_rows(Rng& rng, Eigen::Index n, const Eigen::MatrixXd& cov) {
  return standard_normal_matrix(rng, n, cov.rows()) * psd_root(cov).transpose();
}

/// Laplace(0, b) with variance 2 b^2.
inline double laplace_draw(Rng& rng, double scale) {
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution coin(0.5);
  const double e = ex(rng) * scale;
  return coin(rng) ? e : -e;
}

}  // namespace exsimex
