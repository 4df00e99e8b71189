#include "keyrate/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace keyrate {

namespace {

double half_weight(const MuWeights& w) { return 0.5 * (w.mu1 + w.mu2); }

// Largest eigenvalue of a - b clipped at zero: how far a <= b is violated.
double excess(const SymMatrix& a, const SymMatrix& b) { return std::max(0.0, max_eig(a - b)); }

}  // namespace

Enhancement build_enhancement(const SourceModel& model, const SolveResult& result, double tol) {
  const MuWeights& w = result.weights;
  if (w.mu1 + w.mu2 <= tol) throw DegenerateWeights("enhancement undefined: mu1 + mu2 must be positive");
  const Splitting& s = result.splitting;
  if (result.M2.mat().isZero(0.0)) return Enhancement{model.KY(), w, s, result.M2};
  const SymMatrix rest = model.K() - s.sum();
  const SymMatrix bracket = inv(rest + model.KY()) + (2.0 / (w.mu1 + w.mu2)) * result.M2;
  SymMatrix kt = inv(bracket) - rest;
  return Enhancement{std::move(kt), w, s, result.M2};
}

EnhancementReport verify_enhancement(const SourceModel& model, const SolveResult& result, const Enhancement& enh,
                                     double tol) {
  const double inf = std::numeric_limits<double>::infinity();
  const SymMatrix& kt = enh.K_Y_tilde;
  const SymMatrix& b1 = enh.splitting.B1;
  const SymMatrix s = enh.splitting.sum();
  const SymMatrix& k = model.K();
  const double c = half_weight(enh.weights);

  EnhancementReport r;
  r.hypotheses_met = result.converged;

  const double lo = min_eig(kt);
  r.residual1 = std::max(excess(kt, model.KY()), std::max(0.0, -lo));
  r.prop1 = lo > 0.0 && r.residual1 <= tol;

  r.residual2 = excess(kt, model.KZ());
  r.prop2 = r.residual2 <= tol;

  try {
    const SymMatrix lhs = c * inv(k + kt - b1);
    const SymMatrix rhs = c * inv(k + model.KY() - b1) + enh.M2;
    r.residual3 = (lhs - rhs).frobenius();
  } catch (const NotPositiveDefinite&) {
    r.residual3 = inf;
  }
  r.prop3 = r.residual3 <= tol;

  try {
    const Eigen::MatrixXd tilde = inv(k + kt - s).mat() * (k + kt - b1).mat();
    const Eigen::MatrixXd orig = inv(k + model.KY() - s).mat() * (k + model.KY() - b1).mat();
    r.residual4 = (tilde - orig).norm();
  } catch (const NotPositiveDefinite&) {
    r.residual4 = inf;
  }
  r.prop4 = r.residual4 <= tol;

  r.max_violation = std::max({r.residual1, r.residual2, r.residual3, r.residual4});
  return r;
}

double substitution_residual(const SourceModel& model, const Enhancement& enh) {
  const MuWeights& w = enh.weights;
  const SymMatrix rest = model.K() - enh.splitting.sum();
  SymMatrix rhs = (0.5 * w.mu1) * inv(rest + model.KZ());
  if (w.mu2 != 0.0) rhs += (0.5 * w.mu2) * inv(rest);
  return (half_weight(w) * inv(rest + enh.K_Y_tilde) - rhs).frobenius();
}

}  // namespace keyrate
