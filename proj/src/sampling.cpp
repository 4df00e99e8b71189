#include "keyrate/sampling.hpp"

#include <cmath>

namespace keyrate {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

Eigen::MatrixXd random_orthogonal(int p, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd g(p, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i) g(i, j) = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

SymMatrix random_spd(int p, double lo, double hi, Rng& rng) {
  const Eigen::MatrixXd q = random_orthogonal(p, rng);
  Eigen::VectorXd d(p);
  for (int i = 0; i < p; ++i) d[i] = uniform(rng, lo, hi);
  return from_eigen(q, d);
}

SymMatrix random_spd_log(int p, double lo, double hi, Rng& rng) {
  const Eigen::MatrixXd q = random_orthogonal(p, rng);
  Eigen::VectorXd d(p);
  for (int i = 0; i < p; ++i) d[i] = log_uniform(rng, lo, hi);
  return from_eigen(q, d);
}

}  // namespace keyrate
