#pragma once

// Numerical checks of the extremal entropy inequality behind the converse:
//
//   (mu1+mu2) h(Y|U) - mu1 h(Z|U) - mu2 h(X|U)
//     + mu1 h(Z|V) + (mu3-mu1) h(Y|V) - mu3 h(X|V)  >=  rhs(B1*, B2*)
//
// for every V -> U -> X, plus the two lemmas used to prove it. Only sampled
// evidence is produced: "no violation found" is the strongest outcome.

#include <cstdint>
#include <string>
#include <vector>

#include "keyrate/enhance.hpp"
#include "keyrate/musolver.hpp"
#include "keyrate/parallel.hpp"

namespace keyrate {

/// Conditional differential entropies in nats.
struct EntropyBundle {
  double hY_U = 0.0;
  double hZ_U = 0.0;
  double hX_U = 0.0;
  double hY_V = 0.0;
  double hZ_V = 0.0;
  double hX_V = 0.0;
};

/// Gaussian entropies 1/2 ln((2 pi e)^p |K_{X|.} + N|). The constants cancel
/// in every weighted combination used here, so they can be left out.
EntropyBundle gaussian_entropy_bundle(const SourceModel& model, const GaussTestChannels& tc,
                                      bool with_constants = true);

double extremal_lhs(const MuWeights& w, const EntropyBundle& b);

/// Six logdet terms at the splitting, without constants.
double extremal_rhs(const SourceModel& model, const MuWeights& w, const Splitting& s);
double extremal_rhs(const SourceModel& model, const SolveResult& result);

struct ScanReport {
  double min_gap = 0.0;
  GaussTestChannels argmin;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  /// False when the scanned result was not KKT-certified.
  bool hypothesis_met = false;
};

/// min over sampled Gaussian test channels of extremal_lhs - extremal_rhs.
/// Sample i depends only on (seed, i).
ScanReport scan_gaussian(const SourceModel& model, const SolveResult& result, std::int64_t n_samples,
                         std::uint64_t seed, Execution ex = Execution::parallel);

/// Gaussian test channels realizing K_{X|V} = K - B1, K_{X|U} = K - B1 - B2.
GaussTestChannels optimal_channels(const SourceModel& model, const Splitting& s);

/// extremal_lhs at optimal_channels minus extremal_rhs; zero up to roundoff.
double tightness_gap(const SourceModel& model, const SolveResult& result);

struct LemmaReport {
  bool hypothesis_ok = false;
  double hypothesis_residual = 0.0;
  double min_gap = 0.0;
  std::int64_t samples = 0;
  std::string detail;
};

/// N3 solving (B*+N1)^{-1} + lambda (B*+N2)^{-1} = (lambda+1) (B*+N3)^{-1}.
SymMatrix costa_n3(const SymMatrix& n1, const SymMatrix& n2, double lambda, const SymMatrix& bstar);

/// Sampled check of
///   h(X+Z1|U) + lambda h(X+Z2|U) - (lambda+1) h(X+Z3|U)
///     <= 1/2 ln|B*+N1| + lambda/2 ln|B*+N2| - (lambda+1)/2 ln|B*+N3|
/// over Gaussian (X, U). Sample 0 is cov(X|U) = B*, where equality holds.
LemmaReport check_costa_lemma(const SymMatrix& n1, const SymMatrix& n2, const SymMatrix& n3, double lambda,
                              const SymMatrix& bstar, std::int64_t samples, std::uint64_t seed,
                              Execution ex = Execution::parallel);

struct WeightedNoise {
  SymMatrix N;
  double lambda;
};

/// Sampled check of
///   sum_i l_i h(X+Z_i|U) - sum_j l_j h(X+Z_j|U)
///     <= sum_i l_i/2 ln|B*+N_i| - sum_j l_j/2 ln|B*+N_j|
/// over Gaussian (X, U) with cov(X|U) <= K, under
///   sum_i l_i (B*+N_i)^{-1} = sum_j l_j (B*+N_j)^{-1} + Psi,  (K-B*) Psi = 0,
/// and N_i <= N* <= N_j for some N*. With one noise per side N* is searched
/// on the segment between them; longer lists must supply the witness.
LemmaReport check_compound_lemma(const std::vector<WeightedNoise>& lower, const std::vector<WeightedNoise>& upper,
                                 const SymMatrix& K, const SymMatrix& bstar, const SymMatrix& psi,
                                 std::int64_t samples, std::uint64_t seed, const SymMatrix* witness = nullptr,
                                 Execution ex = Execution::parallel);

/// Compound-lemma instance that bounds the V-part of the inequality at a
/// solved point: lower {Kt_Y: mu1+mu2, 0: mu3}, upper {K_Z: mu1, K_Y: mu2+mu3},
/// B* = K - B1*, Psi = 2 M1, witness N* = Kt_Y.
struct CompoundInstance {
  std::vector<WeightedNoise> lower;
  std::vector<WeightedNoise> upper;
  SymMatrix K;
  SymMatrix bstar;
  SymMatrix psi;
  SymMatrix witness;
};

CompoundInstance v_part_instance(const SourceModel& model, const SolveResult& result, const Enhancement& enh);

struct Decomposition {
  double part_a = 0.0;
  double part_b = 0.0;
  double part_c = 0.0;
  double total = 0.0;
  double lhs = 0.0;
  /// |total - lhs|
  double identity_residual = 0.0;
  /// Costa-type lower bound on part_a and compound-type bound on part_b.
  double part_a_bound = 0.0;
  double part_b_bound = 0.0;
};

/// Three-way split of extremal_lhs using h(Yt|U), h(Yt|V) of the enhanced
/// observation Yt = X + N(0, Kt_Y). Bounds are left at 0.
Decomposition decompose(const MuWeights& w, const EntropyBundle& b, double hYt_U, double hYt_V);

/// Gaussian decomposition at tc, including both sub-bounds.
Decomposition decomposition_check(const SourceModel& model, const SolveResult& result, const Enhancement& enh,
                                  const GaussTestChannels& tc);

/// Scalar probe over non-Gaussian auxiliaries: U = X + G_U + B, V = U + G_V,
/// G_U ~ N(0, su2), G_V ~ N(0, sv2), B = +-a with probability 1/2.
struct MixtureChannel {
  double su2;
  double sv2;
  double a;
};

/// Exact-up-to-quadrature entropies for the mixture channel (nats, with
/// constants). quad_error receives a Richardson-style error estimate.
EntropyBundle mixture_entropy_bundle(const SourceModel& model, const MixtureChannel& ch, double* quad_error = nullptr);

struct MixtureScan {
  double min_gap = 0.0;
  MixtureChannel argmin{};
  double max_quad_error = 0.0;
  std::int64_t samples = 0;
};

/// p = 1 only; throws DimensionMismatch otherwise.
MixtureScan scan_mixture(const SourceModel& model, const SolveResult& result, std::int64_t n_samples,
                         std::uint64_t seed, Execution ex = Execution::parallel);

/// Entropy of 1/2 N(-d, 1) + 1/2 N(d, 1) minus that of N(0, 1).
double mixture_entropy_excess(double d, int nodes = 4096);

}  // namespace keyrate
