#pragma once

// Vector Gaussian source model Y = X + N_Y, Z = X + N_Z and the Gaussian
// test-channel rate functionals. All rates are in nats.

#include <stdexcept>

#include "keyrate/matcore.hpp"

namespace keyrate {

class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleSplitting : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OrderViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Large finite noise variance standing in for an uninformative auxiliary.
inline constexpr double kUninformative = 1e12;

/// Source covariance K and noise covariances K_Y (Bob), K_Z (Eve); all PD.
class SourceModel {
 public:
  SourceModel(SymMatrix k, SymMatrix k_y, SymMatrix k_z);

  int dim() const { return k_.dim(); }
  const SymMatrix& K() const { return k_; }
  const SymMatrix& KY() const { return k_y_; }
  const SymMatrix& KZ() const { return k_z_; }
  const SymMatrix& K_inv() const { return k_inv_; }

 private:
  SymMatrix k_, k_y_, k_z_, k_inv_;
};

/// Rate-region parameterization: K_{X|V} = K - B1, K_{X|U} = K - B1 - B2.
struct Splitting {
  SymMatrix B1;
  SymMatrix B2;

  SymMatrix sum() const { return B1 + B2; }
  double norm() const { return B1.frobenius() + B2.frobenius(); }
};

/// B1, B2 >= 0 and K - B1 - B2 >= 0, each within psd_tolerance.
bool is_feasible(const SourceModel& model, const Splitting& s);

/// Noise covariances of V = X + N_V and U = X + N_U with Sigma_V >= Sigma_U.
struct GaussTestChannels {
  SymMatrix sigma_v;
  SymMatrix sigma_u;
};

/// Throws OrderViolation / NotPositiveDefinite / DimensionMismatch.
void validate(const SourceModel& model, const GaussTestChannels& tc);

/// (K^{-1} + Sigma^{-1})^{-1}.
SymMatrix cond_cov(const SourceModel& model, const SymMatrix& sigma);

double rate_I1(const SourceModel& model, const GaussTestChannels& tc);
double rate_I2(const SourceModel& model, const GaussTestChannels& tc);
double rate_I3(const SourceModel& model, const GaussTestChannels& tc);

/// Right-hand sides of the three region inequalities:
///   R_K - R_2 <= key,  R_1 + R_2 >= sum,  R_1 >= pub.
struct RegionPoint {
  double key = 0.0;
  double sum = 0.0;
  double pub = 0.0;
};

RegionPoint region_point(const SourceModel& model, const Splitting& s);

Splitting splitting_from_testchannels(const SourceModel& model, const GaussTestChannels& tc);

/// Inverse of splitting_from_testchannels. Directions in which K - B1 (or
/// K - B1 - B2) coincides with K get noise variance kUninformative.
GaussTestChannels testchannels_from_splitting(const SourceModel& model, const Splitting& s);

}  // namespace keyrate
