#include "keyrate/extremal.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "keyrate/sampling.hpp"

namespace keyrate {

namespace {

constexpr double kHypothesisTol = 1e-8;

double order_tol(const SymMatrix& m) { return kHypothesisTol * (1.0 + m.frobenius()); }

double gauss_const(int p) { return 0.5 * p * std::log(2.0 * std::numbers::pi * std::numbers::e); }

double half_ld(const SymMatrix& m) { return 0.5 * logdet(m); }

// c * 1/2 ln|m|, skipped when c == 0 so singular arguments of dropped terms
// do not throw.
double weighted_half_ld(double c, const SymMatrix& m) { return c == 0.0 ? 0.0 : c * half_ld(m); }

SymMatrix log_uniform_spd(int p, double lo, double hi, Rng& rng) { return random_spd_log(p, lo, hi, rng); }

GaussTestChannels sample_channels(int p, double scale, Rng& rng) {
  SymMatrix su = log_uniform_spd(p, 1e-3 * scale, 1e3 * scale, rng);
  if (uniform(rng, 0.0, 1.0) < 0.1) return GaussTestChannels{su, su};
  SymMatrix sv = su + log_uniform_spd(p, 1e-3 * scale, 1e3 * scale, rng);
  return GaussTestChannels{std::move(sv), std::move(su)};
}

double mean_eig(const SymMatrix& m) { return m.trace() / m.dim(); }

// Samples of cov(X|U) for the lemma scans: sample 0 is B*, the rest are
// L Q diag(d) Q^T L^T with d log-uniform on [lo, hi].
SymMatrix sample_conditional(std::int64_t i, const SymMatrix& bstar, const Eigen::MatrixXd& l, double lo, double hi,
                             std::uint64_t seed) {
  if (i == 0) return bstar;
  Rng rng = stream_rng(seed, static_cast<std::uint64_t>(i));
  const int p = bstar.dim();
  const Eigen::MatrixXd q = random_orthogonal(p, rng);
  Eigen::VectorXd d(p);
  for (int k = 0; k < p; ++k) d[k] = log_uniform(rng, lo, hi);
  return congruence(l, from_eigen(q, d));
}

void require_samples(std::int64_t n, const char* where) {
  if (n < 1) throw std::invalid_argument(std::string(where) + ": samples must be >= 1");
}

// log cosh(y) without overflow.
double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

EntropyBundle gaussian_entropy_bundle(const SourceModel& model, const GaussTestChannels& tc, bool with_constants) {
  validate(model, tc);
  const SymMatrix cu = cond_cov(model, tc.sigma_u);
  const SymMatrix cv = cond_cov(model, tc.sigma_v);
  const double c = with_constants ? gauss_const(model.dim()) : 0.0;
  EntropyBundle b;
  b.hY_U = c + half_ld(cu + model.KY());
  b.hZ_U = c + half_ld(cu + model.KZ());
  b.hX_U = c + half_ld(cu);
  b.hY_V = c + half_ld(cv + model.KY());
  b.hZ_V = c + half_ld(cv + model.KZ());
  b.hX_V = c + half_ld(cv);
  return b;
}

double extremal_lhs(const MuWeights& w, const EntropyBundle& b) {
  return (w.mu1 + w.mu2) * b.hY_U - w.mu1 * b.hZ_U - w.mu2 * b.hX_U + w.mu1 * b.hZ_V + (w.mu3 - w.mu1) * b.hY_V -
         w.mu3 * b.hX_V;
}

double extremal_rhs(const SourceModel& model, const MuWeights& w, const Splitting& s) {
  const SymMatrix after_u = model.K() - s.sum();
  const SymMatrix after_v = model.K() - s.B1;
  return weighted_half_ld(w.mu1 + w.mu2, after_u + model.KY()) - weighted_half_ld(w.mu1, after_u + model.KZ()) -
         weighted_half_ld(w.mu2, after_u) + weighted_half_ld(w.mu1, after_v + model.KZ()) +
         weighted_half_ld(w.mu3 - w.mu1, after_v + model.KY()) - weighted_half_ld(w.mu3, after_v);
}

double extremal_rhs(const SourceModel& model, const SolveResult& result) {
  return extremal_rhs(model, result.weights, result.splitting);
}

ScanReport scan_gaussian(const SourceModel& model, const SolveResult& result, std::int64_t n_samples,
                         std::uint64_t seed, Execution ex) {
  require_samples(n_samples, "scan_gaussian");
  const int p = model.dim();
  const double scale = mean_eig(model.K());
  const double rhs = extremal_rhs(model, result);
  auto channels = [&](std::int64_t i) {
    Rng rng = stream_rng(seed, static_cast<std::uint64_t>(i));
    return sample_channels(p, scale, rng);
  };
  const IndexedMin best = min_over_range(
      n_samples,
      [&](std::int64_t i) {
        return extremal_lhs(result.weights, gaussian_entropy_bundle(model, channels(i), false)) - rhs;
      },
      ex);
  return ScanReport{best.value, channels(best.index), n_samples, seed, result.converged};
}

GaussTestChannels optimal_channels(const SourceModel& model, const Splitting& s) {
  return testchannels_from_splitting(model, s);
}

double tightness_gap(const SourceModel& model, const SolveResult& result) {
  const GaussTestChannels tc = optimal_channels(model, result.splitting);
  return extremal_lhs(result.weights, gaussian_entropy_bundle(model, tc, false)) - extremal_rhs(model, result);
}

SymMatrix costa_n3(const SymMatrix& n1, const SymMatrix& n2, double lambda, const SymMatrix& bstar) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("costa_n3: lambda must be >= 0");
  const SymMatrix mean = (lambda + 1.0) * inv(inv(bstar + n1) + lambda * inv(bstar + n2));
  return mean - bstar;
}

LemmaReport check_costa_lemma(const SymMatrix& n1, const SymMatrix& n2, const SymMatrix& n3, double lambda,
                              const SymMatrix& bstar, std::int64_t samples, std::uint64_t seed, Execution ex) {
  require_samples(samples, "check_costa_lemma");
  if (!(lambda >= 0.0)) throw std::invalid_argument("check_costa_lemma: lambda must be >= 0");
  require_same_dim(n1, n2, "check_costa_lemma(N1, N2)");
  require_same_dim(n1, n3, "check_costa_lemma(N1, N3)");
  require_same_dim(n1, bstar, "check_costa_lemma(N1, B*)");

  LemmaReport r;
  r.samples = samples;
  std::ostringstream detail;
  bool pre = true;
  for (const SymMatrix* n : {&n1, &n2, &n3})
    if (!(min_eig(*n) > 0.0)) {
      pre = false;
      detail << "noise covariance not positive definite; ";
    }
  if (!loewner_leq(n1, n2, order_tol(n2))) {
    pre = false;
    detail << "N1 <= N2 violated; ";
  }
  if (min_eig(bstar) < -order_tol(bstar)) {
    pre = false;
    detail << "B* not PSD; ";
  }
  if (!pre) {
    r.hypothesis_residual = std::numeric_limits<double>::infinity();
  } else {
    r.hypothesis_residual = (inv(bstar + n1) + lambda * inv(bstar + n2) - (lambda + 1.0) * inv(bstar + n3)).frobenius();
    if (r.hypothesis_residual > kHypothesisTol) detail << "identity residual " << r.hypothesis_residual << "; ";
  }
  r.hypothesis_ok = pre && r.hypothesis_residual <= kHypothesisTol;

  auto combo = [&](const SymMatrix& c) {
    return half_ld(c + n1) + lambda * half_ld(c + n2) - (lambda + 1.0) * half_ld(c + n3);
  };
  if (pre) {
    const double bound = combo(bstar);
    const double scale = std::max(mean_eig(bstar + n1), 1e-12);
    const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n1.dim(), n1.dim());
    const IndexedMin best = min_over_range(
        samples,
        [&](std::int64_t i) {
          return bound - combo(sample_conditional(i, bstar, ident, 1e-4 * scale, 1e2 * scale, seed));
        },
        ex);
    r.min_gap = best.value;
  }
  r.detail = detail.str();
  return r;
}

LemmaReport check_compound_lemma(const std::vector<WeightedNoise>& lower, const std::vector<WeightedNoise>& upper,
                                 const SymMatrix& K, const SymMatrix& bstar, const SymMatrix& psi,
                                 std::int64_t samples, std::uint64_t seed, const SymMatrix* witness,
                                 Execution ex) {
  require_samples(samples, "check_compound_lemma");
  if (lower.empty() || upper.empty()) throw std::invalid_argument("check_compound_lemma: empty noise list");
  require_same_dim(K, bstar, "check_compound_lemma(K, B*)");
  require_same_dim(K, psi, "check_compound_lemma(K, Psi)");
  for (const auto& wn : lower) require_same_dim(K, wn.N, "check_compound_lemma(lower)");
  for (const auto& wn : upper) require_same_dim(K, wn.N, "check_compound_lemma(upper)");

  LemmaReport r;
  r.samples = samples;
  std::ostringstream detail;
  bool pre = true;
  auto fail = [&](const char* what) {
    pre = false;
    detail << what << "; ";
  };
  for (const auto* list : {&lower, &upper})
    for (const auto& wn : *list) {
      if (!(wn.lambda >= 0.0)) fail("negative weight");
      if (min_eig(wn.N) < -order_tol(wn.N)) fail("noise covariance not PSD");
    }
  if (min_eig(psi) < -order_tol(psi)) fail("Psi not PSD");
  if (min_eig(bstar) < -order_tol(bstar)) fail("B* not PSD");
  if (!loewner_leq(bstar, K, order_tol(K))) fail("B* <= K violated");

  // N* with N_i <= N* <= N_j. For one noise per side any point of the segment
  // works exactly when N_1 <= N_2, so N_1 itself is the candidate.
  const SymMatrix* nstar = witness;
  if (nstar == nullptr) {
    if (lower.size() != 1 || upper.size() != 1) fail("no N* witness for multi-noise lists");
    else nstar = &lower.front().N;
  }
  if (nstar != nullptr) {
    for (const auto& wn : lower)
      if (!loewner_leq(wn.N, *nstar, order_tol(*nstar))) fail("N_i <= N* violated");
    for (const auto& wn : upper)
      if (!loewner_leq(*nstar, wn.N, order_tol(wn.N))) fail("N* <= N_j violated");
  }

  auto combo = [&](const SymMatrix& c) {
    double v = 0.0;
    for (const auto& wn : lower) v += weighted_half_ld(wn.lambda, c + wn.N);
    for (const auto& wn : upper) v -= weighted_half_ld(wn.lambda, c + wn.N);
    return v;
  };

  if (pre) {
    try {
      SymMatrix balance = -psi;
      for (const auto& wn : lower)
        if (wn.lambda != 0.0) balance += wn.lambda * inv(bstar + wn.N);
      for (const auto& wn : upper)
        if (wn.lambda != 0.0) balance -= wn.lambda * inv(bstar + wn.N);
      const double orth = ((K - bstar).mat() * psi.mat()).norm();
      r.hypothesis_residual = std::max(balance.frobenius(), orth);
      if (balance.frobenius() > kHypothesisTol) detail << "identity residual " << balance.frobenius() << "; ";
      if (orth > kHypothesisTol) detail << "orthogonality residual " << orth << "; ";
    } catch (const NotPositiveDefinite&) {
      fail("B* + N not invertible");
    }
  }
  if (!pre) r.hypothesis_residual = std::numeric_limits<double>::infinity();
  r.hypothesis_ok = pre && r.hypothesis_residual <= kHypothesisTol;

  if (pre) {
    const double bound = combo(bstar);
    const Eigen::MatrixXd l = cholesky_lower(K);
    const IndexedMin best = min_over_range(
        samples, [&](std::int64_t i) { return bound - combo(sample_conditional(i, bstar, l, 1e-4, 1.0, seed)); },
        ex);
    r.min_gap = best.value;
  }
  r.detail = detail.str();
  return r;
}

CompoundInstance v_part_instance(const SourceModel& model, const SolveResult& result, const Enhancement& enh) {
  const MuWeights& w = result.weights;
  const int p = model.dim();
  CompoundInstance c{{{enh.K_Y_tilde, w.mu1 + w.mu2}, {SymMatrix::zero(p), w.mu3}},
                     {{model.KZ(), w.mu1}, {model.KY(), w.mu2 + w.mu3}},
                     model.K(),
                     model.K() - result.splitting.B1,
                     2.0 * result.M1,
                     enh.K_Y_tilde};
  return c;
}

Decomposition decompose(const MuWeights& w, const EntropyBundle& b, double hYt_U, double hYt_V) {
  const double m12 = w.mu1 + w.mu2;
  Decomposition d;
  d.part_a = m12 * hYt_U - w.mu1 * b.hZ_U - w.mu2 * b.hX_U;
  d.part_b = w.mu1 * b.hZ_V + (w.mu2 + w.mu3) * b.hY_V - m12 * hYt_V - w.mu3 * b.hX_V;
  d.part_c = m12 * ((b.hY_U - hYt_U) - (b.hY_V - hYt_V));
  d.total = d.part_a + d.part_b + d.part_c;
  d.lhs = extremal_lhs(w, b);
  d.identity_residual = std::abs(d.total - d.lhs);
  return d;
}

Decomposition decomposition_check(const SourceModel& model, const SolveResult& result, const Enhancement& enh,
                                  const GaussTestChannels& tc) {
  const MuWeights& w = result.weights;
  const EntropyBundle b = gaussian_entropy_bundle(model, tc, false);
  const SymMatrix cu = cond_cov(model, tc.sigma_u);
  const SymMatrix cv = cond_cov(model, tc.sigma_v);
  const SymMatrix& kt = enh.K_Y_tilde;
  Decomposition d = decompose(w, b, half_ld(cu + kt), half_ld(cv + kt));

  const SymMatrix after_u = model.K() - result.splitting.sum();
  const SymMatrix after_v = model.K() - result.splitting.B1;
  const double m12 = w.mu1 + w.mu2;
  d.part_a_bound = weighted_half_ld(m12, after_u + kt) - weighted_half_ld(w.mu1, after_u + model.KZ()) -
                   weighted_half_ld(w.mu2, after_u);
  d.part_b_bound = weighted_half_ld(w.mu1, after_v + model.KZ()) +
                   weighted_half_ld(w.mu2 + w.mu3, after_v + model.KY()) - weighted_half_ld(m12, after_v + kt) -
                   weighted_half_ld(w.mu3, after_v);
  return d;
}

double mixture_entropy_excess(double d, int nodes) {
  if (nodes < 3) throw std::invalid_argument("mixture_entropy_excess: need at least 3 nodes");
  d = std::abs(d);
  if (d == 0.0) return 0.0;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double lo = -d - 12.0;
  const double h = 2.0 * (d + 12.0) / (nodes - 1);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = lo + i * h;
    const double log_f = -0.5 * (x * x + d * d) - half_log_2pi + log_cosh(x * d);
    const double term = -std::exp(log_f) * log_f;
    acc += (i == 0 || i == nodes - 1) ? 0.5 * term : term;
  }
  return acc * h - 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

EntropyBundle mixture_entropy_bundle(const SourceModel& model, const MixtureChannel& ch, double* quad_error) {
  if (model.dim() != 1) throw DimensionMismatch("mixture_entropy_bundle: scalar models only");
  if (!(ch.su2 > 0.0) || !(ch.sv2 >= 0.0) || !std::isfinite(ch.a))
    throw std::invalid_argument("mixture_entropy_bundle: need su2 > 0, sv2 >= 0, finite a");
  const double k = model.K()(0, 0);
  const double c = gauss_const(1);
  double err = 0.0;
  auto excess = [&](double delta) {
    const double fine = mixture_entropy_excess(delta, 4096);
    err += std::abs(fine - mixture_entropy_excess(delta, 2048));
    return fine;
  };
  // h(W | A) for W = X + N(0, n) and A = X + N(0, ka - k) + B.
  auto cond = [&](double n, double ka, double aux_excess) {
    const double w = k + n;
    const double det = w * ka - k * k;
    return c + 0.5 * std::log(det / ka) + excess(ch.a * std::sqrt(w / det)) - aux_excess;
  };
  const double ku = k + ch.su2;
  const double kv = ku + ch.sv2;
  const double ex_u = excess(ch.a / std::sqrt(ku));
  const double ex_v = excess(ch.a / std::sqrt(kv));
  EntropyBundle b;
  b.hY_U = cond(model.KY()(0, 0), ku, ex_u);
  b.hZ_U = cond(model.KZ()(0, 0), ku, ex_u);
  b.hX_U = cond(0.0, ku, ex_u);
  b.hY_V = cond(model.KY()(0, 0), kv, ex_v);
  b.hZ_V = cond(model.KZ()(0, 0), kv, ex_v);
  b.hX_V = cond(0.0, kv, ex_v);
  if (quad_error != nullptr) *quad_error = err;
  return b;
}

MixtureScan scan_mixture(const SourceModel& model, const SolveResult& result, std::int64_t n_samples,
                         std::uint64_t seed, Execution ex) {
  require_samples(n_samples, "scan_mixture");
  if (model.dim() != 1) throw DimensionMismatch("scan_mixture: scalar models only");
  const double k = model.K()(0, 0);
  const double rhs = extremal_rhs(model, result);
  auto channel = [&](std::int64_t i) {
    Rng rng = stream_rng(seed, static_cast<std::uint64_t>(i));
    MixtureChannel ch{};
    ch.su2 = log_uniform(rng, 1e-3, 1e3) * k;
    ch.sv2 = uniform(rng, 0.0, 1.0) < 0.1 ? 0.0 : log_uniform(rng, 1e-3, 1e3) * k;
    ch.a = uniform(rng, 0.0, 4.0) * std::sqrt(k + ch.su2);
    return ch;
  };
  std::vector<double> errors(static_cast<std::size_t>(n_samples), 0.0);
  const IndexedMin best = min_over_range(
      n_samples,
      [&](std::int64_t i) {
        const EntropyBundle b = mixture_entropy_bundle(model, channel(i), &errors[static_cast<std::size_t>(i)]);
        return extremal_lhs(result.weights, b) - rhs;
      },
      ex);
  MixtureScan out;
  out.min_gap = best.value;
  out.argmin = channel(best.index);
  out.samples = n_samples;
  for (double e : errors) out.max_quad_error = std::max(out.max_quad_error, e);
  return out;
}

}  // namespace keyrate
