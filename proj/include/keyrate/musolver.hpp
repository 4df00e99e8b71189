#pragma once

// Weighted-sum ("mu-sum") program over splittings (B1, B2):
//
//   min  (mu1+mu2)/2 ln|K+K_Y-B1-B2| - mu1/2 ln|K+K_Z-B1-B2| - mu2/2 ln|K-B1-B2|
//      + mu1/2 ln|K+K_Z-B1| + (mu3-mu1)/2 ln|K+K_Y-B1| - mu3/2 ln|K-B1|
//      + (mu2+mu3)/2 (ln|K| - ln|K+K_Y|)
//   s.t. B1 >= 0, B2 >= 0, B1 + B2 <= K.
//
// Each minimizer gives a supporting hyperplane of the key-rate region:
//   (mu2+mu3) R1 + (mu1+mu2) R2 - mu1 RK >= value.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "keyrate/gaussmodel.hpp"
#include "keyrate/parallel.hpp"

namespace keyrate {

class InvalidWeights : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoFeasibleStart : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonnegative, finite, not all zero.
struct MuWeights {
  double mu1;
  double mu2;
  double mu3;

  MuWeights(double m1, double m2, double m3);
};

struct SolverOptions {
  int starts = 32;
  int max_iters = 2000;
  double grad_tol = 1e-9;
  double kkt_tol = 1e-6;
  std::uint64_t seed = 42;
  /// Interior margin on K - B1 - B2, relative to trace(K) / p.
  double epsilon_margin = 1e-7;
  /// Keep every start's local result in SolveResult::candidates.
  bool keep_candidates = false;
};

/// Residuals of the KKT system with multipliers M1, M2 recovered from the
/// stationarity equations. All entries are >= 0.
struct KktResidual {
  double stat1 = 0.0;
  double stat2 = 0.0;
  double dual1 = 0.0;
  double dual2 = 0.0;
  double comp1 = 0.0;
  double comp2 = 0.0;

  double max() const;
};

struct Multipliers {
  SymMatrix M1;
  SymMatrix M2;
};

struct StartOutcome {
  int start = 0;
  Splitting splitting;
  double value = 0.0;
  int iterations = 0;
  double projected_gradient = 0.0;
  bool certified = false;
};

struct SolveResult {
  MuWeights weights;
  Splitting splitting;
  double value;
  SymMatrix M1;
  SymMatrix M2;
  KktResidual kkt;
  int starts_used = 0;
  bool converged = false;
  std::vector<StartOutcome> candidates;
};

struct Gradient {
  SymMatrix G1;
  SymMatrix G2;
};

/// Throws InfeasibleSplitting when a logdet argument with a nonzero
/// coefficient is not positive definite. Zero-coefficient terms are dropped.
double mu_sum_objective(const SourceModel& model, const MuWeights& w, const Splitting& s);

Gradient mu_sum_gradient(const SourceModel& model, const MuWeights& w, const Splitting& s);

/// M2 balances the B2 stationarity equation and M1 the B1 one. They equal
/// the two gradient blocks; PSD-ness is not guaranteed.
Multipliers recover_multipliers(const SourceModel& model, const MuWeights& w, const Splitting& s);

KktResidual kkt_residual(const SourceModel& model, const MuWeights& w, const Splitting& s);

/// Multi-start projected gradient. Starts run under OpenMP; the merge is an
/// ordered reduction by start index so the result equals solve_mu_sum_serial
/// bit for bit.
SolveResult solve_mu_sum(const SourceModel& model, const MuWeights& w, const SolverOptions& opts);

/// Serial reference for solve_mu_sum.
SolveResult solve_mu_sum_serial(const SourceModel& model, const MuWeights& w, const SolverOptions& opts);

/// Euclidean projection onto {B1 >= 0, B2 >= 0, B1 + B2 <= K - eps I}
/// by Dykstra's alternating projections.
Splitting project_feasible(const SymMatrix& K, double eps, const Splitting& s);

struct BoundaryRow {
  MuWeights weights;
  double value;
  Splitting splitting;
  KktResidual kkt;
  RegionPoint region;
  bool converged;
};

/// Simplex grid mu1 + mu2 + mu3 = 1 with points_per_edge points on each
/// edge, ordered by mu1 index then mu2 index.
std::vector<MuWeights> simplex_grid(int points_per_edge);

std::vector<BoundaryRow> trace_boundary(const SourceModel& model, const std::vector<MuWeights>& grid,
                                        const SolverOptions& opts);

/// Rate triple (RK, R1, R2) in nats.
struct RatePoint {
  double rk = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
};

/// Corner rate triple attained by a region point: R1 = pub, R2 = sum - pub,
/// RK = key + R2.
RatePoint rates_at(const RegionPoint& r);

enum class Verdict { inside, outside, boundary };

const char* to_string(Verdict v);

struct RateCheck {
  Verdict verdict;
  MuWeights worst_weight;
  double worst_slack;
};

/// Hyperplane test against already traced rows.
RateCheck check_rate_point(const std::vector<BoundaryRow>& rows, const RatePoint& rate, double tol = 1e-6);

RateCheck check_rate_point(const SourceModel& model, const RatePoint& rate, const std::vector<MuWeights>& grid,
                           const SolverOptions& opts, double tol = 1e-6);

/// mu1 (-key) + mu2 sum + mu3 pub, the objective rewritten through the
/// region bounds.
double objective_from_region(const MuWeights& w, const RegionPoint& r);

}  // namespace keyrate
