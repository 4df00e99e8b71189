#include "keyrate/dms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "keyrate/sampling.hpp"

namespace keyrate {

namespace {

constexpr double kPmfTol = 1e-12;

enum Var : unsigned { kV = 1, kU = 2, kX = 4, kY = 8, kZ = 16 };

// Joint pmf of (V, U, X, Y, Z), V slowest.
struct Joint {
  std::array<int, 5> card;
  std::vector<double> p;

  double entropy(unsigned mask) const {
    std::array<int, 5> stride{};
    int size = 1;
    for (int k = 4; k >= 0; --k) {
      if (mask & (1u << k)) {
        stride[k] = size;
        size *= card[k];
      }
    }
    std::vector<double> marg(static_cast<std::size_t>(size), 0.0);
    std::size_t idx = 0;
    for (int v = 0; v < card[0]; ++v)
      for (int u = 0; u < card[1]; ++u)
        for (int x = 0; x < card[2]; ++x)
          for (int y = 0; y < card[3]; ++y)
            for (int z = 0; z < card[4]; ++z, ++idx) {
              const double q = p[idx];
              if (q == 0.0) continue;
              marg[static_cast<std::size_t>(v * stride[0] + u * stride[1] + x * stride[2] + y * stride[3] +
                                            z * stride[4])] += q;
            }
    double h = 0.0;
    for (double q : marg)
      if (q > 0.0) h -= q * std::log(q);
    return h;
  }
};

Joint make_joint(const DiscreteSource& src, const AuxChannels& aux) {
  Joint j{{aux.card_v, aux.card_u, src.card_x, src.card_y, src.card_z}, {}};
  j.p.resize(static_cast<std::size_t>(aux.card_v) * aux.card_u * src.card_x * src.card_y * src.card_z);
  std::size_t idx = 0;
  for (int v = 0; v < aux.card_v; ++v)
    for (int u = 0; u < aux.card_u; ++u)
      for (int x = 0; x < src.card_x; ++x) {
        const double chain = aux.pv_given_u(u, v) * aux.pu_given_x(x, u);
        for (int y = 0; y < src.card_y; ++y)
          for (int z = 0; z < src.card_z; ++z, ++idx) j.p[idx] = chain * src.p(x, y, z);
      }
  return j;
}

void check_stochastic(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite() || (m.array() < 0.0).any()) throw InvalidPmf(std::string(name) + ": negative or non-finite entry");
  for (int r = 0; r < m.rows(); ++r)
    if (std::abs(m.row(r).sum() - 1.0) > kPmfTol) {
      std::ostringstream os;
      os << name << ": row " << r << " sums to " << m.row(r).sum();
      throw InvalidPmf(os.str());
    }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Lloyd-Max decision thresholds of the 8-level quantizer for N(0, 1).
constexpr std::array<double, 7> kLloydMax8 = {-1.748, -1.050, -0.5006, 0.0, 0.5006, 1.050, 1.748};

Eigen::MatrixXd dirichlet_rows(int rows, int cols, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int c = 0; c < cols; ++c) total += (m(r, c) = gamma(rng));
    if (total > 0.0) m.row(r) /= total;
    else m.row(r).setConstant(1.0 / cols);
  }
  return m;
}

// Deterministic map with digits of `code` in base `cols`.
Eigen::MatrixXd deterministic_rows(int rows, int cols, std::int64_t code) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (int r = 0; r < rows; ++r) {
    m(r, static_cast<int>(code % cols)) = 1.0;
    code /= cols;
  }
  return m;
}

std::int64_t int_pow(std::int64_t b, int e, std::int64_t cap) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) {
    r *= b;
    if (r > cap) return cap + 1;
  }
  return r;
}

bool dominates(const RateTriple& a, const RateTriple& b, double tol) {
  return a.key_term >= b.key_term - tol && a.sum_term <= b.sum_term + tol && a.pub_term <= b.pub_term + tol;
}

bool strictly_better(const RateTriple& a, const RateTriple& b, double tol) {
  return a.key_term > b.key_term + tol || a.sum_term < b.sum_term - tol || a.pub_term < b.pub_term - tol;
}

bool lex_less(const RateTriple& a, const RateTriple& b) {
  if (a.key_term != b.key_term) return a.key_term < b.key_term;
  if (a.sum_term != b.sum_term) return a.sum_term < b.sum_term;
  return a.pub_term < b.pub_term;
}

}  // namespace

void validate(const DiscreteSource& src) {
  if (src.card_x < 1 || src.card_y < 1 || src.card_z < 1) throw InvalidPmf("DiscreteSource: cardinalities must be >= 1");
  const std::size_t n = static_cast<std::size_t>(src.card_x) * src.card_y * src.card_z;
  if (src.pxyz.size() != n) {
    std::ostringstream os;
    os << "DiscreteSource: pmf has " << src.pxyz.size() << " entries, expected " << n;
    throw InvalidPmf(os.str());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = src.pxyz[i];
    if (!std::isfinite(q) || q < 0.0) {
      std::ostringstream os;
      os << "DiscreteSource: pmf entry " << i << " is negative or non-finite";
      throw InvalidPmf(os.str());
    }
    total += q;
  }
  if (std::abs(total - 1.0) > kPmfTol) {
    std::ostringstream os;
    os.precision(17);
    os << "DiscreteSource: pmf sums to " << total;
    throw InvalidPmf(os.str());
  }
}

void validate(const DiscreteSource& src, const AuxChannels& aux) {
  validate(src);
  if (aux.card_u < 1 || aux.card_v < 1) throw InvalidPmf("AuxChannels: cardinalities must be >= 1");
  if (aux.pu_given_x.rows() != src.card_x || aux.pu_given_x.cols() != aux.card_u)
    throw InvalidPmf("AuxChannels: p(u|x) must be card_x x card_u");
  if (aux.pv_given_u.rows() != aux.card_u || aux.pv_given_u.cols() != aux.card_v)
    throw InvalidPmf("AuxChannels: p(v|u) must be card_u x card_v");
  check_stochastic(aux.pu_given_x, "AuxChannels p(u|x)");
  check_stochastic(aux.pv_given_u, "AuxChannels p(v|u)");
}

DiscreteSource binary_symmetric_source(double ey, double ez) {
  if (!(ey >= 0.0 && ey <= 1.0 && ez >= 0.0 && ez <= 1.0))
    throw InvalidPmf("binary_symmetric_source: crossover probabilities must lie in [0, 1]");
  DiscreteSource s{2, 2, 2, std::vector<double>(8)};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        s.pxyz[static_cast<std::size_t>((x * 2 + y) * 2 + z)] = 0.5 * (y == x ? 1.0 - ey : ey) * (z == x ? 1.0 - ez : ez);
  return s;
}

DiscreteSource quantized_gaussian_source(double k, double ky, double kz) {
  if (!(k > 0.0 && ky > 0.0 && kz > 0.0)) throw InvalidPmf("quantized_gaussian_source: variances must be positive");
  const double sx = std::sqrt(k), sy = std::sqrt(k + ky), sz = std::sqrt(k + kz);
  const double sny = std::sqrt(ky), snz = std::sqrt(kz);
  auto cond_cell = [](int c, double x, double s_obs, double s_noise) {
    const double lo = c == 0 ? -INFINITY : kLloydMax8[static_cast<std::size_t>(c - 1)] * s_obs;
    const double hi = c == 7 ? INFINITY : kLloydMax8[static_cast<std::size_t>(c)] * s_obs;
    return normal_cdf((hi - x) / s_noise) - normal_cdf((lo - x) / s_noise);
  };
  DiscreteSource s{8, 8, 8, std::vector<double>(512, 0.0)};
  // Composite Simpson per X cell, tails truncated at 10 standard deviations.
  constexpr int kIntervals = 2000;
  for (int cx = 0; cx < 8; ++cx) {
    const double lo = cx == 0 ? -10.0 * sx : kLloydMax8[static_cast<std::size_t>(cx - 1)] * sx;
    const double hi = cx == 7 ? 10.0 * sx : kLloydMax8[static_cast<std::size_t>(cx)] * sx;
    const double h = (hi - lo) / kIntervals;
    for (int i = 0; i <= kIntervals; ++i) {
      const double x = lo + i * h;
      const double wgt = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      const double px = std::exp(-0.5 * x * x / k) / std::sqrt(2.0 * std::numbers::pi * k) * wgt * h / 3.0;
      for (int cy = 0; cy < 8; ++cy) {
        const double py = cond_cell(cy, x, sy, sny);
        for (int cz = 0; cz < 8; ++cz)
          s.pxyz[static_cast<std::size_t>((cx * 8 + cy) * 8 + cz)] += px * py * cond_cell(cz, x, sz, snz);
      }
    }
  }
  double total = 0.0;
  for (double q : s.pxyz) total += q;
  for (double& q : s.pxyz) q /= total;
  return s;
}

AuxInfo aux_info(const DiscreteSource& src, const AuxChannels& aux) {
  validate(src, aux);
  const Joint j = make_joint(src, aux);
  auto h = [&](unsigned mask) { return j.entropy(mask); };
  const double hV = h(kV), hX = h(kX), hY = h(kY), hZ = h(kZ);
  const double hUV = h(kU | kV), hYV = h(kY | kV), hZV = h(kZ | kV), hXV = h(kX | kV);
  const double hUYV = h(kU | kY | kV), hUZV = h(kU | kZ | kV), hUXV = h(kU | kX | kV);
  const double hXY = h(kX | kY), hUY = h(kU | kY), hUXY = h(kU | kX | kY), hVY = h(kV | kY), hVXY = h(kV | kX | kY);
  const double hXYV = h(kX | kY | kV), hUXYV = h(kU | kX | kY | kV);

  AuxInfo a;
  a.I_UY_V = hUV + hYV - hUYV - hV;
  a.I_UZ_V = hUV + hZV - hUZV - hV;
  a.I_UX_YV = hUYV + hXYV - hUXYV - hYV;
  a.I_VX = hV + hX - h(kV | kX);
  a.I_UX_V = hUV + hXV - hUXV - hV;
  a.I_VY = hV + hY - hVY;
  a.I_VZ = hV + hZ - h(kV | kZ);
  a.H_U_ZV = hUZV - hZV;
  a.H_U_YV = hUYV - hYV;
  a.triple.key_term = a.I_UY_V - a.I_UZ_V;
  a.triple.sum_term = hUY + hXY - hUXY - hY;
  a.triple.pub_term = hVY + hXY - hVXY - hY;
  return a;
}

RateTriple rate_triple(const DiscreteSource& src, const AuxChannels& aux) { return aux_info(src, aux).triple; }

AuxChannels normalize_aux(const AuxChannels& aux) {
  AuxChannels out;
  out.card_u = aux.card_u * aux.card_v;
  out.card_v = 1;
  out.pu_given_x = Eigen::MatrixXd::Zero(aux.pu_given_x.rows(), out.card_u);
  for (int x = 0; x < aux.pu_given_x.rows(); ++x)
    for (int u = 0; u < aux.card_u; ++u)
      for (int v = 0; v < aux.card_v; ++v) out.pu_given_x(x, u * aux.card_v + v) = aux.pu_given_x(x, u) * aux.pv_given_u(u, v);
  out.pv_given_u = Eigen::MatrixXd::Ones(out.card_u, 1);
  return out;
}

AuxChannels identity_aux(int card_x) {
  return AuxChannels{card_x, 1, Eigen::MatrixXd::Identity(card_x, card_x), Eigen::MatrixXd::Ones(card_x, 1)};
}

std::vector<RateTriple> pareto_filter(std::vector<RateTriple> pts, double tol) {
  std::sort(pts.begin(), pts.end(), [](const RateTriple& a, const RateTriple& b) {
    if (a.key_term != b.key_term) return a.key_term > b.key_term;
    if (a.sum_term != b.sum_term) return a.sum_term < b.sum_term;
    return a.pub_term < b.pub_term;
  });
  std::vector<RateTriple> kept;
  for (const auto& q : pts) {
    bool covered = false;
    for (const auto& k : kept)
      if (dominates(k, q, tol)) {
        covered = true;
        break;
      }
    if (!covered) kept.push_back(q);
  }
  // A later point can still beat an earlier one whose key was higher by less
  // than tol.
  std::vector<RateTriple> out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    bool beaten = false;
    for (std::size_t j = 0; j < kept.size() && !beaten; ++j)
      beaten = j != i && dominates(kept[j], kept[i], tol) && strictly_better(kept[j], kept[i], tol);
    if (!beaten) out.push_back(kept[i]);
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

std::vector<RateTriple> inner_region(const DiscreteSource& src, int card_u, int card_v, std::int64_t n_samples,
                                     std::uint64_t seed, Execution ex) {
  validate(src);
  if (card_u < 1 || card_v < 1) throw std::invalid_argument("inner_region: cardinalities must be >= 1");
  if (n_samples < 0) throw std::invalid_argument("inner_region: n_samples must be >= 0");
  constexpr std::int64_t kMaxDeterministic = 4096;

  struct Job {
    int cu, cv;
    std::int64_t round;  // >= 0 random, < 0 deterministic code -(round + 1)
  };
  std::vector<std::pair<int, int>> pairs;
  for (int u = 1; u <= card_u; ++u)
    for (int v = 1; v <= card_v; ++v) pairs.emplace_back(u, v);

  std::vector<Job> jobs;
  for (const auto& [u, v] : pairs) {
    const std::int64_t maps_u = int_pow(u, src.card_x, kMaxDeterministic);
    const std::int64_t maps_v = int_pow(v, u, kMaxDeterministic);
    if (maps_u * maps_v > kMaxDeterministic) continue;
    for (std::int64_t code = 0; code < maps_u * maps_v; ++code) jobs.push_back({u, v, -(code + 1)});
  }
  const auto npairs = static_cast<std::int64_t>(pairs.size());
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const auto& [u, v] = pairs[static_cast<std::size_t>(i % npairs)];
    jobs.push_back({u, v, i / npairs});
  }

  auto channel = [&](const Job& job) {
    AuxChannels aux{job.cu, job.cv, {}, {}};
    if (job.round < 0) {
      const std::int64_t code = -(job.round + 1);
      const std::int64_t maps_u = int_pow(job.cu, src.card_x, kMaxDeterministic);
      aux.pu_given_x = deterministic_rows(src.card_x, job.cu, code % maps_u);
      aux.pv_given_u = deterministic_rows(job.cu, job.cv, code / maps_u);
      return aux;
    }
    const std::uint64_t stream =
        mix_seed(mix_seed(static_cast<std::uint64_t>(job.cu), static_cast<std::uint64_t>(job.cv)),
                 static_cast<std::uint64_t>(job.round));
    Rng rng = stream_rng(seed, stream);
    const double alpha = log_uniform(rng, 0.1, 1.0);
    aux.pu_given_x = dirichlet_rows(src.card_x, job.cu, alpha, rng);
    aux.pv_given_u = dirichlet_rows(job.cu, job.cv, alpha, rng);
    return aux;
  };

  std::vector<RateTriple> pts(jobs.size());
  const auto njobs = static_cast<std::int64_t>(jobs.size());
  if (ex == Execution::serial) {
    for (std::int64_t i = 0; i < njobs; ++i) pts[static_cast<std::size_t>(i)] = rate_triple(src, channel(jobs[static_cast<std::size_t>(i)]));
  } else {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < njobs; ++i) pts[static_cast<std::size_t>(i)] = rate_triple(src, channel(jobs[static_cast<std::size_t>(i)]));
  }
  return pareto_filter(std::move(pts));
}

RateAllocation binning_allocation(const DiscreteSource& src, const AuxChannels& aux, double R1, double R2,
                                  double slack) {
  if (!(R1 >= 0.0) || !(R2 >= 0.0) || !std::isfinite(R1) || !std::isfinite(R2))
    throw std::invalid_argument("binning_allocation: rates must be finite and >= 0");
  if (!(slack > 0.0)) throw std::invalid_argument("binning_allocation: slack must be > 0");
  const AuxInfo a = aux_info(src, aux);
  const double key = a.triple.key_term;

  RateAllocation r;
  r.R_V = a.I_VX + slack;
  r.R_U = a.I_UX_V + slack;
  r.R_K1 = std::max(0.0, key - 4.0 * slack);
  const bool key_ok = key >= -1e-12;
  // With R_K1 = 0 no key bits come from the U layer and the leakage
  // condition is vacuous.
  const bool leak_ok = r.R_K1 == 0.0 || r.R_K1 - (a.H_U_ZV - a.H_U_YV - 2.0 * slack) <= -slack;

  if (R1 >= a.triple.sum_term + slack) {
    r.alloc_case = AllocationCase::separate;
    r.R11 = R1;
    r.R12 = 0.0;
    r.R21 = 0.0;
    r.R22 = R2;
    r.feasible = key_ok && leak_ok;
  } else {
    r.alloc_case = AllocationCase::layered;
    r.R11 = a.triple.pub_term + 3.0 * slack;
    r.R12 = R1 - r.R11;
    r.R21 = a.I_UX_YV - r.R12 + 3.0 * slack;
    r.R22 = R2 - r.R21;
    const bool split_ok = r.R12 >= 0.0 && r.R21 >= 0.0 && r.R21 <= R2;
    const bool decode_v = (r.R_V - r.R11) - a.I_VY <= -slack;
    const bool decode_u = (r.R_U - r.R12 - r.R21) - a.I_UY_V <= -slack;
    r.feasible = split_ok && decode_v && decode_u && key_ok && leak_ok;
  }
  r.achieved_key = r.feasible ? r.R_K1 + r.R21 + r.R22 : 0.0;
  return r;
}

}  // namespace keyrate
