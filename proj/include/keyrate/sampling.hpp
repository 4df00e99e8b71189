#pragma once

// Seed derivation and random matrix generators. Every sampled quantity is a
// function of (seed, stream index) only, so results do not depend on how the
// work is split across threads.

#include <cstdint>
#include <random>

#include "keyrate/matcore.hpp"

namespace keyrate {

using Rng = std::mt19937_64;

/// splitmix64 finalizer applied to seed + golden-ratio * stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

double uniform(Rng& rng, double lo, double hi);
double log_uniform(Rng& rng, double lo, double hi);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Eigen::MatrixXd random_orthogonal(int p, Rng& rng);

/// Q diag(d) Q^T with d_i ~ U[lo, hi].
SymMatrix random_spd(int p, double lo, double hi, Rng& rng);

/// Q diag(d) Q^T with d_i log-uniform on [lo, hi].
SymMatrix random_spd_log(int p, double lo, double hi, Rng& rng);

}  // namespace keyrate
