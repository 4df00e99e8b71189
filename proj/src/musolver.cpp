#include "keyrate/musolver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>

#include "keyrate/sampling.hpp"

namespace keyrate {

MuWeights::MuWeights(double m1, double m2, double m3) : mu1(m1), mu2(m2), mu3(m3) {
  if (!std::isfinite(m1) || !std::isfinite(m2) || !std::isfinite(m3))
    throw InvalidWeights("weights must be finite");
  if (m1 < 0.0 || m2 < 0.0 || m3 < 0.0) throw InvalidWeights("weights must be nonnegative");
  if (m1 == 0.0 && m2 == 0.0 && m3 == 0.0) throw InvalidWeights("weights must not all vanish");
}

double KktResidual::max() const { return std::max({stat1, stat2, dual1, dual2, comp1, comp2}); }

namespace {

// Coefficients of the six logdet terms.
struct Coeffs {
  double ky_s, kz_s, k_s;  // arguments K+K_Y-S, K+K_Z-S, K-S
  double kz_1, ky_1, k_1;  // arguments K+K_Z-B1, K+K_Y-B1, K-B1

  explicit Coeffs(const MuWeights& w)
      : ky_s(0.5 * (w.mu1 + w.mu2)),
        kz_s(-0.5 * w.mu1),
        k_s(-0.5 * w.mu2),
        kz_1(0.5 * w.mu1),
        ky_1(0.5 * (w.mu3 - w.mu1)),
        k_1(-0.5 * w.mu3) {}
};

double objective_constant(const SourceModel& model, const MuWeights& w) {
  if (w.mu2 + w.mu3 == 0.0) return 0.0;
  return 0.5 * (w.mu2 + w.mu3) * (logdet(model.K()) - logdet(model.K() + model.KY()));
}

std::optional<double> try_objective(const SourceModel& model, const Coeffs& c, double constant,
                                    const Splitting& s) {
  const SymMatrix& k = model.K();
  const SymMatrix sum = s.sum();
  double acc = constant;
  auto add = [&](double coeff, const SymMatrix& arg) {
    if (coeff == 0.0) return true;
    const auto ld = try_logdet(arg);
    if (!ld) return false;
    acc += coeff * *ld;
    return true;
  };
  const SymMatrix rest_u = k - sum;
  const SymMatrix rest_v = k - s.B1;
  if (!add(c.ky_s, rest_u + model.KY()) || !add(c.kz_s, rest_u + model.KZ()) || !add(c.k_s, rest_u) ||
      !add(c.kz_1, rest_v + model.KZ()) || !add(c.ky_1, rest_v + model.KY()) || !add(c.k_1, rest_v))
    return std::nullopt;
  return acc;
}

SymMatrix inv_or_throw(const SymMatrix& m, const char* what) {
  try {
    return inv(m);
  } catch (const NotPositiveDefinite&) {
    throw InfeasibleSplitting(std::string(what) + ": logdet argument is not positive definite");
  }
}

Gradient gradient_impl(const SourceModel& model, const Coeffs& c, const Splitting& s) {
  const int p = model.dim();
  const SymMatrix rest_u = model.K() - s.sum();
  const SymMatrix rest_v = model.K() - s.B1;
  SymMatrix g2 = SymMatrix::zero(p);
  auto sub = [&](SymMatrix& g, double coeff, const SymMatrix& arg) {
    if (coeff != 0.0) g -= coeff * inv_or_throw(arg, "mu_sum_gradient");
  };
  sub(g2, c.ky_s, rest_u + model.KY());
  sub(g2, c.kz_s, rest_u + model.KZ());
  sub(g2, c.k_s, rest_u);
  SymMatrix g1 = g2;
  sub(g1, c.kz_1, rest_v + model.KZ());
  sub(g1, c.ky_1, rest_v + model.KY());
  sub(g1, c.k_1, rest_v);
  return Gradient{std::move(g1), std::move(g2)};
}

double dist2(const Splitting& a, const Splitting& b) {
  return (a.B1.mat() - b.B1.mat()).squaredNorm() + (a.B2.mat() - b.B2.mat()).squaredNorm();
}

double inner(const Gradient& g, const Splitting& a, const Splitting& b) {
  return (g.G1.mat().cwiseProduct(b.B1.mat() - a.B1.mat())).sum() +
         (g.G2.mat().cwiseProduct(b.B2.mat() - a.B2.mat())).sum();
}

Splitting step(const Splitting& x, const Gradient& g, double t) {
  return Splitting{x.B1 - t * g.G1, x.B2 - t * g.G2};
}

double margin(const SourceModel& model, const SolverOptions& opts) {
  return opts.epsilon_margin * model.K().trace() / model.dim();
}

struct Problem {
  const SourceModel& model;
  MuWeights w;
  Coeffs c;
  double constant;
  double eps;

  Problem(const SourceModel& m, const MuWeights& weights, double e)
      : model(m), w(weights), c(weights), constant(objective_constant(m, weights)), eps(e) {}

  std::optional<double> value(const Splitting& s) const { return try_objective(model, c, constant, s); }
  Gradient gradient(const Splitting& s) const { return gradient_impl(model, c, s); }
  Splitting project(const Splitting& s) const { return project_feasible(model.K(), eps, s); }
};

Splitting start_point(const SourceModel& model, int index, std::uint64_t seed) {
  const int p = model.dim();
  if (index == 0) return Splitting{SymMatrix::zero(p), SymMatrix::zero(p)};
  Rng rng(mix_seed(seed ^ static_cast<std::uint64_t>(index), 0));
  const Eigen::MatrixXd l = cholesky_lower(model.K());
  const Eigen::MatrixXd q = random_orthogonal(p, rng);
  Eigen::VectorXd d1(p), d2(p);
  for (int i = 0; i < p; ++i) {
    const double total = uniform(rng, 0.0, 0.95);
    const double share = uniform(rng, 0.0, 1.0);
    d1[i] = share * total;
    d2[i] = (1.0 - share) * total;
    const double r = uniform(rng, 0.0, 1.0);
    if (r < 0.25) d1[i] = 0.0;
    else if (r < 0.5) d2[i] = 0.0;
  }
  return Splitting{congruence(l, from_eigen(q, d1)), congruence(l, from_eigen(q, d2))};
}

// Barzilai-Borwein step <s, s> / <s, y>, clamped; 1 when the curvature
// estimate is unusable.
double bb_step(const Splitting& x0, const Splitting& x1, const Gradient& g0, const Gradient& g1) {
  const Eigen::MatrixXd s1 = x1.B1.mat() - x0.B1.mat(), s2 = x1.B2.mat() - x0.B2.mat();
  const Eigen::MatrixXd y1 = g1.G1.mat() - g0.G1.mat(), y2 = g1.G2.mat() - g0.G2.mat();
  const double ss = s1.squaredNorm() + s2.squaredNorm();
  const double sy = s1.cwiseProduct(y1).sum() + s2.cwiseProduct(y2).sum();
  if (!(sy > 0.0) || !(ss > 0.0)) return 1.0;
  return std::clamp(ss / sy, 1e-8, 1e8);
}

bool certified(const KktResidual& r, double tol) {
  return r.dual1 <= tol && r.dual2 <= tol && r.comp1 <= tol && r.comp2 <= tol;
}

StartOutcome run_start(const Problem& prob, int index, const SolverOptions& opts) {
  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr int kMaxBacktracks = 60;

  const int p = prob.model.dim();
  Splitting x = prob.project(start_point(prob.model, index, opts.seed));
  std::optional<double> f = prob.value(x);
  if (!f) {
    x = prob.project(Splitting{SymMatrix::zero(p), SymMatrix::zero(p)});
    f = prob.value(x);
    if (!f) throw NoFeasibleStart("solve_mu_sum: no feasible start");
  }
  Gradient g = prob.gradient(x);

  StartOutcome out{index, x, *f};
  int it = 0;
  double pg = std::numeric_limits<double>::infinity();
  double initial = 1.0;
  for (; it < opts.max_iters; ++it) {
    const Splitting prev = x;
    pg = std::sqrt(dist2(x, prob.project(step(x, g, 1.0))));
    if (pg <= opts.grad_tol) break;

    bool accepted = false;
    double t = initial;
    for (int ls = 0; ls < kMaxBacktracks && !accepted; ++ls, t *= kShrink) {
      Splitting xn = prob.project(step(x, g, t));
      const std::optional<double> fn = prob.value(xn);
      if (!fn) continue;
      const double decrease = inner(g, x, xn);
      if (*fn <= *f + kArmijo * decrease) {
        accepted = true;
      } else if (decrease < 0.0 && std::abs(*fn - *f) <= 1e-13 * (1.0 + std::abs(*f))) {
        // Below roundoff in f: accept if the projected gradient shrinks.
        const Gradient gn = prob.gradient(xn);
        accepted = std::sqrt(dist2(xn, prob.project(step(xn, gn, 1.0)))) < pg;
      }
      if (accepted) {
        x = std::move(xn);
        f = fn;
      }
    }
    if (!accepted) break;
    Gradient gn = prob.gradient(x);
    initial = bb_step(prev, x, g, gn);
    g = std::move(gn);
  }

  out.splitting = x;
  out.value = *f;
  out.iterations = it;
  out.projected_gradient = pg;
  const KktResidual r = kkt_residual(prob.model, prob.w, x);
  out.certified = certified(r, opts.kkt_tol);
  return out;
}

void check_options(const SourceModel& model, const SolverOptions& opts) {
  if (opts.starts < 1) throw std::invalid_argument("SolverOptions: starts must be >= 1");
  if (opts.max_iters < 0) throw std::invalid_argument("SolverOptions: max_iters must be >= 0");
  if (!(opts.grad_tol > 0.0) || !(opts.kkt_tol > 0.0))
    throw std::invalid_argument("SolverOptions: tolerances must be positive");
  if (!(opts.epsilon_margin >= 0.0)) throw std::invalid_argument("SolverOptions: epsilon_margin must be >= 0");
  const double eps = margin(model, opts);
  if (!(min_eig(model.K()) > eps)) throw NoFeasibleStart("solve_mu_sum: eps I is not below K");
}

// Best value wins; values within a relative 1e-9 of the best count as tied,
// and ties prefer certified starts, then starts that reached grad_tol, then
// the smallest ||B1|| + ||B2||, then the lowest start index.
const StartOutcome& select(const std::vector<StartOutcome>& outs, double grad_tol) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : outs) best = std::min(best, o.value);
  const double tie = 1e-9 * (1.0 + std::abs(best));
  const StartOutcome* pick = nullptr;
  for (const auto& o : outs) {
    if (o.value > best + tie) continue;
    if (pick == nullptr) {
      pick = &o;
      continue;
    }
    if (o.certified != pick->certified) {
      if (o.certified) pick = &o;
      continue;
    }
    const bool o_stationary = o.projected_gradient <= grad_tol;
    if (o_stationary != (pick->projected_gradient <= grad_tol)) {
      if (o_stationary) pick = &o;
      continue;
    }
    if (o.splitting.norm() < pick->splitting.norm()) pick = &o;
  }
  return *pick;
}

SolveResult finish(const Problem& prob, const std::vector<StartOutcome>& outs, const SolverOptions& opts) {
  const StartOutcome& best = select(outs, opts.grad_tol);
  Splitting s = project_feasible(prob.model.K(), 0.0, best.splitting);
  if (!prob.value(s)) s = best.splitting;
  const double value = mu_sum_objective(prob.model, prob.w, s);
  Multipliers m = recover_multipliers(prob.model, prob.w, s);
  const KktResidual kkt = kkt_residual(prob.model, prob.w, s);
  SolveResult r{prob.w, s, value, std::move(m.M1), std::move(m.M2), kkt, static_cast<int>(outs.size()),
                certified(kkt, opts.kkt_tol), {}};
  if (opts.keep_candidates) r.candidates = outs;
  return r;
}

SolveResult solve_impl(const SourceModel& model, const MuWeights& w, const SolverOptions& opts, Execution ex) {
  check_options(model, opts);
  const Problem prob(model, w, margin(model, opts));
  std::vector<std::optional<StartOutcome>> slots(opts.starts);
  std::vector<std::exception_ptr> errors(opts.starts);
  auto run = [&](int i) {
    try {
      slots[i] = run_start(prob, i, opts);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (ex == Execution::serial) {
    for (int i = 0; i < opts.starts; ++i) run(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < opts.starts; ++i) run(i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<StartOutcome> outs;
  outs.reserve(slots.size());
  for (auto& s : slots) outs.push_back(std::move(*s));
  return finish(prob, outs, opts);
}

}  // namespace

double mu_sum_objective(const SourceModel& model, const MuWeights& w, const Splitting& s) {
  require_same_dim(model.K(), s.B1, "mu_sum_objective(B1)");
  require_same_dim(model.K(), s.B2, "mu_sum_objective(B2)");
  const auto v = try_objective(model, Coeffs(w), objective_constant(model, w), s);
  if (!v) throw InfeasibleSplitting("mu_sum_objective: logdet argument is not positive definite");
  return *v;
}

Gradient mu_sum_gradient(const SourceModel& model, const MuWeights& w, const Splitting& s) {
  require_same_dim(model.K(), s.B1, "mu_sum_gradient(B1)");
  require_same_dim(model.K(), s.B2, "mu_sum_gradient(B2)");
  return gradient_impl(model, Coeffs(w), s);
}

Multipliers recover_multipliers(const SourceModel& model, const MuWeights& w, const Splitting& s) {
  Gradient g = mu_sum_gradient(model, w, s);
  return Multipliers{std::move(g.G1), std::move(g.G2)};
}

KktResidual kkt_residual(const SourceModel& model, const MuWeights& w, const Splitting& s) {
  const Multipliers m = recover_multipliers(model, w, s);
  const SymMatrix& k = model.K();
  const SymMatrix rest_u = k - s.sum();
  const SymMatrix rest_v = k - s.B1;
  const int p = model.dim();
  auto term = [&](double coeff, const SymMatrix& arg) {
    return coeff == 0.0 ? SymMatrix::zero(p) : coeff * inv_or_throw(arg, "kkt_residual");
  };

  // mu1/2 (K+K_Z-S)^-1 + mu2/2 (K-S)^-1 = (mu1+mu2)/2 (K+K_Y-S)^-1 + M2
  const SymMatrix eq2 = term(0.5 * w.mu1, rest_u + model.KZ()) + term(0.5 * w.mu2, rest_u) -
                        term(0.5 * (w.mu1 + w.mu2), rest_u + model.KY()) - m.M2;
  // mu3/2 (K-B1)^-1 + (mu1-mu3)/2 (K+K_Y-B1)^-1 + M2 = mu1/2 (K+K_Z-B1)^-1 + M1
  const SymMatrix eq1 = term(0.5 * w.mu3, rest_v) + term(0.5 * (w.mu1 - w.mu3), rest_v + model.KY()) + m.M2 -
                        term(0.5 * w.mu1, rest_v + model.KZ()) - m.M1;

  KktResidual r;
  r.stat1 = eq1.frobenius();
  r.stat2 = eq2.frobenius();
  r.dual1 = std::max(0.0, -min_eig(m.M1));
  r.dual2 = std::max(0.0, -min_eig(m.M2));
  r.comp1 = (s.B1.mat() * m.M1.mat()).norm();
  r.comp2 = (s.B2.mat() * m.M2.mat()).norm();
  return r;
}

Splitting project_feasible(const SymMatrix& K, double eps, const Splitting& s) {
  constexpr int kMaxSweeps = 50;
  constexpr double kChangeTol = 1e-12;
  const int p = K.dim();
  const SymMatrix upper = K - SymMatrix::scaled_identity(p, eps);

  Splitting x{project_psd(s.B1), project_psd(s.B2)};
  if (max_eig(x.sum() - upper) <= 0.0) return x;

  // Dykstra: set a = {B1 >= 0}, set b = {B2 >= 0}, set c = {B1 + B2 <= upper}.
  SymMatrix x1 = s.B1, x2 = s.B2;
  SymMatrix inc_a = SymMatrix::zero(p), inc_b = SymMatrix::zero(p);
  SymMatrix inc_c1 = SymMatrix::zero(p), inc_c2 = SymMatrix::zero(p);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const SymMatrix prev1 = x1, prev2 = x2;

    SymMatrix y = project_psd(x1 + inc_a);
    inc_a = x1 + inc_a - y;
    x1 = std::move(y);

    y = project_psd(x2 + inc_b);
    inc_b = x2 + inc_b - y;
    x2 = std::move(y);

    const SymMatrix z1 = x1 + inc_c1, z2 = x2 + inc_c2;
    const SymMatrix half_excess = 0.5 * project_psd(z1 + z2 - upper);
    x1 = z1 - half_excess;
    x2 = z2 - half_excess;
    inc_c1 = half_excess;
    inc_c2 = half_excess;

    const double change = std::sqrt((x1 - prev1).mat().squaredNorm() + (x2 - prev2).mat().squaredNorm());
    if (change <= kChangeTol) break;
  }
  Splitting out{project_psd(x1), project_psd(x2)};
  // Unconverged sweeps can leave B1 + B2 slightly above the bound; scale back
  // by the largest generalized eigenvalue of (B1 + B2, upper).
  const Eigen::MatrixXd l = cholesky_lower(upper);
  const Eigen::MatrixXd whitened = l.triangularView<Eigen::Lower>().solve(
      l.triangularView<Eigen::Lower>().solve(out.sum().mat()).transpose());
  const double ratio = max_eig(SymMatrix(whitened));
  if (ratio > 1.0) {
    out.B1 = out.B1 * (1.0 / ratio);
    out.B2 = out.B2 * (1.0 / ratio);
  }
  return out;
}

SolveResult solve_mu_sum(const SourceModel& model, const MuWeights& w, const SolverOptions& opts) {
  return solve_impl(model, w, opts, Execution::parallel);
}

SolveResult solve_mu_sum_serial(const SourceModel& model, const MuWeights& w, const SolverOptions& opts) {
  return solve_impl(model, w, opts, Execution::serial);
}

std::vector<MuWeights> simplex_grid(int points_per_edge) {
  if (points_per_edge < 2) throw std::invalid_argument("simplex_grid: need at least 2 points per edge");
  const int n = points_per_edge - 1;
  std::vector<MuWeights> out;
  out.reserve(static_cast<std::size_t>((n + 1) * (n + 2) / 2));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j)
      out.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n, static_cast<double>(n - i - j) / n);
  return out;
}

std::vector<BoundaryRow> trace_boundary(const SourceModel& model, const std::vector<MuWeights>& grid,
                                        const SolverOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("trace_boundary: empty weight grid");
  std::vector<BoundaryRow> rows;
  rows.reserve(grid.size());
  for (const MuWeights& w : grid) {
    SolveResult r = solve_mu_sum(model, w, opts);
    const RegionPoint region = region_point(model, r.splitting);
    rows.push_back(BoundaryRow{w, r.value, std::move(r.splitting), r.kkt, region, r.converged});
  }
  return rows;
}

RatePoint rates_at(const RegionPoint& r) {
  RatePoint rate;
  rate.r1 = r.pub;
  rate.r2 = r.sum - r.pub;
  rate.rk = r.key + rate.r2;
  return rate;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::inside:
      return "inside";
    case Verdict::outside:
      return "outside";
    case Verdict::boundary:
      return "boundary";
  }
  return "unknown";
}

RateCheck check_rate_point(const std::vector<BoundaryRow>& rows, const RatePoint& rate, double tol) {
  if (rows.empty()) throw std::invalid_argument("check_rate_point: no boundary rows");
  if (!std::isfinite(rate.rk) || !std::isfinite(rate.r1) || !std::isfinite(rate.r2))
    throw std::invalid_argument("check_rate_point: rates must be finite");
  if (rate.r1 < 0.0 || rate.r2 < 0.0) throw std::invalid_argument("check_rate_point: R1, R2 must be >= 0");
  const BoundaryRow* worst = nullptr;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    const MuWeights& w = row.weights;
    const double slack = (w.mu2 + w.mu3) * rate.r1 + (w.mu1 + w.mu2) * rate.r2 - w.mu1 * rate.rk - row.value;
    if (slack < worst_slack) {
      worst_slack = slack;
      worst = &row;
    }
  }
  Verdict v = Verdict::boundary;
  if (worst_slack < -tol) v = Verdict::outside;
  else if (worst_slack > tol) v = Verdict::inside;
  return RateCheck{v, worst->weights, worst_slack};
}

RateCheck check_rate_point(const SourceModel& model, const RatePoint& rate, const std::vector<MuWeights>& grid,
                           const SolverOptions& opts, double tol) {
  return check_rate_point(trace_boundary(model, grid, opts), rate, tol);
}

double objective_from_region(const MuWeights& w, const RegionPoint& r) {
  return -w.mu1 * r.key + w.mu2 * r.sum + w.mu3 * r.pub;
}

}  // namespace keyrate
