#include "keyrate/gaussmodel.hpp"

#include <algorithm>
#include <sstream>

namespace keyrate {

namespace {

void require_pd(const SymMatrix& m, const char* name) {
  const double lo = min_eig(m);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "SourceModel: " << name << " must be positive definite (min eigenvalue " << lo << ")";
    throw InvalidModel(os.str());
  }
}

double half_logdet(const SymMatrix& m) { return 0.5 * logdet(m); }

// Noise covariance whose conditional covariance is c: (c^{-1} - K^{-1})^{-1},
// with precision eigenvalues floored at 1 / kUninformative.
SymMatrix noise_for_cond_cov(const SourceModel& model, const SymMatrix& c) {
  const SymMatrix precision = inv(c) - model.K_inv();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(precision.mat());
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(1.0 / kUninformative).cwiseInverse();
  return from_eigen(es.eigenvectors(), d);
}

}  // namespace

SourceModel::SourceModel(SymMatrix k, SymMatrix k_y, SymMatrix k_z)
    : k_(std::move(k)), k_y_(std::move(k_y)), k_z_(std::move(k_z)), k_inv_(SymMatrix::identity(1)) {
  require_same_dim(k_, k_y_, "SourceModel(K, K_Y)");
  require_same_dim(k_, k_z_, "SourceModel(K, K_Z)");
  require_pd(k_, "K");
  require_pd(k_y_, "K_Y");
  require_pd(k_z_, "K_Z");
  k_inv_ = inv(k_);
}

bool is_feasible(const SourceModel& model, const Splitting& s) {
  require_same_dim(model.K(), s.B1, "is_feasible(B1)");
  require_same_dim(model.K(), s.B2, "is_feasible(B2)");
  if (min_eig(s.B1) < -psd_tolerance(s.B1)) return false;
  if (min_eig(s.B2) < -psd_tolerance(s.B2)) return false;
  const SymMatrix rest = model.K() - s.B1 - s.B2;
  return min_eig(rest) >= -psd_tolerance(model.K());
}

void validate(const SourceModel& model, const GaussTestChannels& tc) {
  require_same_dim(model.K(), tc.sigma_u, "GaussTestChannels(sigma_u)");
  require_same_dim(model.K(), tc.sigma_v, "GaussTestChannels(sigma_v)");
  if (!(min_eig(tc.sigma_u) > 0.0)) throw NotPositiveDefinite("GaussTestChannels: Sigma_U must be positive definite");
  if (!loewner_leq(tc.sigma_u, tc.sigma_v, psd_tolerance(tc.sigma_v)))
    throw OrderViolation("GaussTestChannels: Sigma_V >= Sigma_U is required for V -> U -> X");
}

SymMatrix cond_cov(const SourceModel& model, const SymMatrix& sigma) {
  require_same_dim(model.K(), sigma, "cond_cov");
  return inv(model.K_inv() + inv(sigma));
}

double rate_I1(const SourceModel& model, const GaussTestChannels& tc) {
  validate(model, tc);
  const SymMatrix cv = cond_cov(model, tc.sigma_v);
  const SymMatrix cu = cond_cov(model, tc.sigma_u);
  return half_logdet(cv + model.KY()) - half_logdet(cv + model.KZ()) - half_logdet(cu + model.KY()) +
         half_logdet(cu + model.KZ());
}

double rate_I2(const SourceModel& model, const GaussTestChannels& tc) {
  validate(model, tc);
  const SymMatrix cu = cond_cov(model, tc.sigma_u);
  return half_logdet(model.K()) - half_logdet(cu) - half_logdet(model.K() + model.KY()) +
         half_logdet(cu + model.KY());
}

double rate_I3(const SourceModel& model, const GaussTestChannels& tc) {
  validate(model, tc);
  const SymMatrix cv = cond_cov(model, tc.sigma_v);
  return half_logdet(model.K()) - half_logdet(cv) - half_logdet(model.K() + model.KY()) +
         half_logdet(cv + model.KY());
}

RegionPoint region_point(const SourceModel& model, const Splitting& s) {
  if (!is_feasible(model, s)) throw InfeasibleSplitting("region_point: splitting is not feasible");
  const SymMatrix& k = model.K();
  const SymMatrix after_v = k - s.B1;
  const SymMatrix after_u = after_v - s.B2;
  const auto ld_u = try_logdet(after_u);
  if (!ld_u) throw InfeasibleSplitting("region_point: K - B1 - B2 is singular");

  RegionPoint r;
  r.key = half_logdet(after_v + model.KY()) - half_logdet(after_u + model.KY()) -
          half_logdet(after_v + model.KZ()) + half_logdet(after_u + model.KZ());
  r.sum = half_logdet(k) - 0.5 * *ld_u - half_logdet(k + model.KY()) + half_logdet(after_u + model.KY());
  r.pub = half_logdet(k) - half_logdet(after_v) - half_logdet(k + model.KY()) +
          half_logdet(after_v + model.KY());
  return r;
}

Splitting splitting_from_testchannels(const SourceModel& model, const GaussTestChannels& tc) {
  validate(model, tc);
  const SymMatrix cv = cond_cov(model, tc.sigma_v);
  const SymMatrix cu = cond_cov(model, tc.sigma_u);
  return Splitting{model.K() - cv, cv - cu};
}

GaussTestChannels testchannels_from_splitting(const SourceModel& model, const Splitting& s) {
  const SymMatrix cv = model.K() - s.B1;
  const SymMatrix cu = cv - s.B2;
  if (!(min_eig(cu) > 0.0))
    throw InfeasibleSplitting("testchannels_from_splitting: K - B1 - B2 must be positive definite");
  SymMatrix sigma_v = noise_for_cond_cov(model, cv);
  SymMatrix sigma_u = noise_for_cond_cov(model, cu);
  return GaussTestChannels{std::move(sigma_v), std::move(sigma_u)};
}

}  // namespace keyrate
