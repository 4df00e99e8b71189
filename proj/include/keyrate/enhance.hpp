#pragma once

// Enhanced Bob covariance built from a solved mu-sum instance:
//
//   (K + Kt_Y - B1 - B2)^{-1} = (K + K_Y - B1 - B2)^{-1} + 2 / (mu1 + mu2) M2.
//
// At a KKT point Kt_Y is sandwiched below both K_Y and K_Z, which turns the
// problem into a degraded one without changing the optimal value.

#include <stdexcept>

#include "keyrate/musolver.hpp"

namespace keyrate {

class DegenerateWeights : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Enhancement {
  SymMatrix K_Y_tilde;
  MuWeights weights;
  Splitting splitting;
  SymMatrix M2;
};

/// Throws DegenerateWeights if mu1 + mu2 <= tol, NotPositiveDefinite if the
/// bracketed inverse does not exist.
Enhancement build_enhancement(const SourceModel& model, const SolveResult& result, double tol = 1e-12);

struct EnhancementReport {
  bool prop1 = false;  // 0 < Kt_Y <= K_Y
  bool prop2 = false;  // Kt_Y <= K_Z
  bool prop3 = false;  // B1-level version of the defining identity
  bool prop4 = false;  // equal "ratio" products at levels B1 + B2 and B1
  double residual1 = 0.0;
  double residual2 = 0.0;
  double residual3 = 0.0;
  double residual4 = 0.0;
  double max_violation = 0.0;
  /// False when the solve was not KKT-certified; the four properties are
  /// only guaranteed at certified points.
  bool hypotheses_met = false;

  bool all() const { return prop1 && prop2 && prop3 && prop4; }
};

EnhancementReport verify_enhancement(const SourceModel& model, const SolveResult& result, const Enhancement& enh,
                                     double tol = 1e-7);

/// Frobenius residual of
///   (mu1+mu2)/2 (K+Kt_Y-S)^{-1} = mu1/2 (K+K_Z-S)^{-1} + mu2/2 (K-S)^{-1}.
double substitution_residual(const SourceModel& model, const Enhancement& enh);

}  // namespace keyrate
