#include <cmath>
#include <numbers>

#include "doctest.h"
#include "instances.hpp"
#include "keyrate/extremal.hpp"
#include "test_util.hpp"

using namespace keyrate;
using keyrate::testing::max_abs_diff;
using keyrate::testing::random_model;
using keyrate::testing::scalar_model;

namespace {

// mpmath references for K=1, K_Y=1, K_Z=3.
constexpr double kHyuRef = 1.62167108725875;  // 1/2 ln(2 pi e 1.5)
constexpr double kHxuRef = 1.07236494292470;  // 1/2 ln(2 pi e 0.5)
constexpr double kRhsRef = 0.472230804420426;  // mu=(1,1,0), B1=0, B2=0.5

GaussTestChannels scalar_tc(double sv, double su) {
  return GaussTestChannels{SymMatrix::diagonal({sv}), SymMatrix::diagonal({su})};
}

SolverOptions tight_options() {
  SolverOptions o;
  o.starts = 16;
  o.grad_tol = 1e-11;
  return o;
}

double bundle_max_diff(const EntropyBundle& a, const EntropyBundle& b) {
  return std::max({std::abs(a.hY_U - b.hY_U), std::abs(a.hZ_U - b.hZ_U), std::abs(a.hX_U - b.hX_U),
                   std::abs(a.hY_V - b.hY_V), std::abs(a.hZ_V - b.hZ_V), std::abs(a.hX_V - b.hX_V)});
}

}  // namespace

TEST_CASE("Gaussian entropy bundle") {
  const SourceModel m = scalar_model(1, 1, 3);
  const EntropyBundle b = gaussian_entropy_bundle(m, scalar_tc(4, 1));
  CHECK(std::abs(b.hY_U - kHyuRef) < 1e-13);
  CHECK(std::abs(b.hX_U - kHxuRef) < 1e-13);
  CHECK(b.hX_U <= b.hX_V);
  const EntropyBundle same = gaussian_entropy_bundle(m, scalar_tc(2, 2));
  CHECK(same.hY_U == same.hY_V);
  CHECK(same.hZ_U == same.hZ_V);
  CHECK(same.hX_U == same.hX_V);
}

TEST_CASE("extremal lhs") {
  const SourceModel eq = scalar_model(1, 2, 2);
  const EntropyBundle b = gaussian_entropy_bundle(eq, scalar_tc(3, 3));
  CHECK(std::abs(extremal_lhs(MuWeights(1, 0, 0), b)) < 1e-15);

  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + trial % 4;
    const SourceModel m = random_model(p, rng);
    const SymMatrix su = random_spd(p, 0.1, 3, rng);
    const GaussTestChannels tc{su + random_spd(p, 0, 3, rng), su};
    const MuWeights w(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    const EntropyBundle with = gaussian_entropy_bundle(m, tc, true);
    const EntropyBundle without = gaussian_entropy_bundle(m, tc, false);
    CHECK(std::abs(extremal_lhs(w, with) - extremal_lhs(w, without)) < 1e-9);
    EntropyBundle shifted = with;
    for (double* h : {&shifted.hY_U, &shifted.hZ_U, &shifted.hX_U, &shifted.hY_V, &shifted.hZ_V, &shifted.hX_V})
      *h += 3.7;
    CHECK(std::abs(extremal_lhs(w, shifted) - extremal_lhs(w, with)) < 1e-12);
  }
  const MuWeights w(1, 1, 0);
  const EntropyBundle s = gaussian_entropy_bundle(scalar_model(1, 1, 3), scalar_tc(4, 1));
  CHECK(extremal_lhs(w, s) == doctest::Approx(2 * s.hY_U - s.hZ_U - s.hX_U + s.hZ_V - s.hY_V).epsilon(1e-15));
}

TEST_CASE("extremal rhs") {
  const SourceModel m = scalar_model(1, 1, 3);
  const MuWeights w(1, 1, 0);
  CHECK(std::abs(extremal_rhs(m, w, Splitting{SymMatrix::zero(1), SymMatrix::diagonal({0.5})}) - kRhsRef) < 1e-14);
  const MuWeights v(0.3, 0.5, 0.7);
  CHECK(std::abs(extremal_rhs(m, v, Splitting{SymMatrix::zero(1), SymMatrix::zero(1)}) - 0.6 * std::log(2.0)) <
        1e-15);

  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const SourceModel r = random_model(1 + trial % 4, rng);
    const MuWeights u(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    const Splitting s = keyrate::testing::random_splitting(r, rng);
    const double constant = 0.5 * (u.mu2 + u.mu3) * (logdet(r.K()) - logdet(r.K() + r.KY()));
    CHECK(std::abs(extremal_rhs(r, u, s) - (mu_sum_objective(r, u, s) - constant)) < 1e-12);
  }
}

TEST_CASE("Gaussian scan on certified instances") {
  Rng rng(43);
  for (int trial = 0; trial < 6; ++trial) {
    const int p = 1 + trial % 3;
    const SourceModel m = random_model(p, rng);
    const MuWeights w(uniform(rng, 0.05, 1), uniform(rng, 0.05, 1), uniform(rng, 0.05, 1));
    const SolveResult r = solve_mu_sum(m, w, tight_options());
    REQUIRE(r.converged);
    const ScanReport scan = scan_gaussian(m, r, 2000, 5);
    CHECK(scan.hypothesis_met);
    CHECK(scan.min_gap >= -1e-7);
    CHECK(std::abs(tightness_gap(m, r)) <= 1e-6);

    const ScanReport serial = scan_gaussian(m, r, 2000, 5, Execution::serial);
    CHECK(serial.min_gap == scan.min_gap);
    CHECK(serial.argmin.sigma_u.mat() == scan.argmin.sigma_u.mat());
    // The reported argmin reproduces the reported gap.
    const double again = extremal_lhs(w, gaussian_entropy_bundle(m, scan.argmin, false)) - extremal_rhs(m, r);
    CHECK(again == scan.min_gap);

    // Away from the minimizer the optimal channels beat the shifted bound.
    SolveResult moved = r;
    moved.splitting.B2 = 0.5 * r.splitting.B2;
    moved.splitting.B1 = 0.5 * r.splitting.B1;
    const double probe = extremal_lhs(w, gaussian_entropy_bundle(m, optimal_channels(m, r.splitting), false)) -
                         extremal_rhs(m, w, moved.splitting);
    CHECK(probe <= 1e-9);
  }
}

TEST_CASE("scan flags uncertified input and validates sample count") {
  const SourceModel m = scalar_model(1, 1, 3);
  SolveResult r = solve_mu_sum(m, MuWeights(1, 1, 0), tight_options());
  r.converged = false;
  CHECK_FALSE(scan_gaussian(m, r, 10, 1).hypothesis_met);
  CHECK_THROWS_AS(scan_gaussian(m, r, 0, 1), std::invalid_argument);
}

TEST_CASE("perturbation probe at non-KKT splittings") {
  const SourceModel m = scalar_model(1, 1, 3);
  const MuWeights w(1, 0.2, 0.1);
  const SolveResult r = solve_mu_sum(m, w, tight_options());
  REQUIRE(r.converged);
  int negative = 0;
  for (double shift : {0.05, 0.1, 0.2}) {
    const Splitting s{r.splitting.B1, r.splitting.B2 + SymMatrix::diagonal({shift})};
    const Multipliers mult = recover_multipliers(m, w, s);
    const SolveResult moved{w, s, mu_sum_objective(m, w, s), mult.M1, mult.M2, kkt_residual(m, w, s), 1, false, {}};
    const ScanReport scan = scan_gaussian(m, moved, 2000, 3);
    CHECK_FALSE(scan.hypothesis_met);
    if (scan.min_gap < -1e-7) ++negative;
    MESSAGE("B2 + " << shift << ": min_gap " << scan.min_gap);
  }
  MESSAGE(negative << " of 3 perturbed splittings violate the bound");
}

TEST_CASE("Costa-type lemma") {
  SUBCASE("equal noises") {
    const SymMatrix n = SymMatrix::diagonal({1, 2});
    const LemmaReport rep = check_costa_lemma(n, n, n, 0.7, SymMatrix::diagonal({0.5, 0.1}), 500, 3);
    CHECK(rep.hypothesis_ok);
    CHECK(std::abs(rep.min_gap) < 1e-12);
  }
  SUBCASE("scalar harmonic example") {
    const SymMatrix n1 = SymMatrix::diagonal({1}), n2 = SymMatrix::diagonal({2});
    const SymMatrix zero = SymMatrix::zero(1);
    const SymMatrix n3 = costa_n3(n1, n2, 1.0, zero);
    CHECK(std::abs(n3(0, 0) - 4.0 / 3.0) < 1e-15);
    const LemmaReport rep = check_costa_lemma(n1, n2, n3, 1.0, zero, 10000, 9);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.min_gap >= -1e-7);
    CHECK(rep.min_gap <= 1e-8);
  }
  SUBCASE("a wrong N3 is reported") {
    const SymMatrix n1 = SymMatrix::diagonal({1}), n2 = SymMatrix::diagonal({2});
    const LemmaReport rep = check_costa_lemma(n1, n2, SymMatrix::diagonal({1.5}), 1.0, SymMatrix::zero(1), 10, 9);
    CHECK_FALSE(rep.hypothesis_ok);
    CHECK_FALSE(rep.detail.empty());
  }
  SUBCASE("random instances") {
    Rng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
      const auto in = keyrate::testing::random_costa(1 + trial % 4, rng);
      const LemmaReport rep = check_costa_lemma(in.n1, in.n2, in.n3, in.lambda, in.bstar, 1000, trial);
      CHECK(rep.hypothesis_ok);
      CHECK(rep.min_gap >= -1e-7);
    }
  }
}

TEST_CASE("compound lemma") {
  SUBCASE("trivial instance") {
    const SymMatrix k = SymMatrix::diagonal({2, 1});
    const SymMatrix n = SymMatrix::diagonal({1, 3});
    const LemmaReport rep = check_compound_lemma({{n, 0.8}}, {{n, 0.8}}, k, SymMatrix::diagonal({1, 0.5}),
                                                 SymMatrix::zero(2), 500, 3);
    CHECK(rep.hypothesis_ok);
    CHECK(std::abs(rep.min_gap) < 1e-12);
  }
  SUBCASE("B* = K makes any Psi orthogonal") {
    Rng rng(53);
    const auto in = keyrate::testing::random_compound_multi(2, rng);
    CHECK(in.psi.frobenius() > 0.0);
    const LemmaReport rep =
        check_compound_lemma(in.lower, in.upper, in.K, in.bstar, in.psi, 1000, 1, &in.witness);
    CHECK(rep.hypothesis_ok);
    CHECK(rep.min_gap >= -1e-7);
  }
  SUBCASE("missing witness for long lists") {
    Rng rng(59);
    auto in = keyrate::testing::random_compound_multi(2, rng);
    in.lower.push_back(in.lower.front());
    CHECK_FALSE(check_compound_lemma(in.lower, in.upper, in.K, in.bstar, in.psi, 10, 1).hypothesis_ok);
  }
  SUBCASE("random single-noise instances") {
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
      const auto in = keyrate::testing::random_compound_single(1 + trial % 4, rng);
      const LemmaReport rep = check_compound_lemma(in.lower, in.upper, in.K, in.bstar, in.psi, 1000, trial);
      CHECK(rep.hypothesis_ok);
      CHECK(rep.min_gap >= -1e-7);
    }
  }
  SUBCASE("instance induced by a solved point") {
    Rng rng(67);
    for (int trial = 0; trial < 6; ++trial) {
      const SourceModel m = random_model(1 + trial % 3, rng);
      const MuWeights w(uniform(rng, 0.05, 1), uniform(rng, 0.05, 1), uniform(rng, 0.05, 1));
      const SolveResult r = solve_mu_sum(m, w, tight_options());
      REQUIRE(r.converged);
      const auto in = v_part_instance(m, r, build_enhancement(m, r));
      const LemmaReport rep =
          check_compound_lemma(in.lower, in.upper, in.K, in.bstar, in.psi, 1000, trial, &in.witness);
      CHECK(rep.hypothesis_ok);
      CHECK(rep.min_gap >= -1e-7);
    }
  }
}

TEST_CASE("decomposition") {
  Rng rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    const int p = 1 + trial % 3;
    const SourceModel m = random_model(p, rng);
    const MuWeights w(uniform(rng, 0.05, 1), uniform(rng, 0.05, 1), uniform(rng, 0.05, 1));
    const SolveResult r = solve_mu_sum(m, w, tight_options());
    REQUIRE(r.converged);
    const Enhancement e = build_enhancement(m, r);
    for (int k = 0; k < 50; ++k) {
      const SymMatrix su = random_spd_log(p, 1e-2, 1e2, rng);
      const GaussTestChannels tc{k % 5 == 0 ? su : su + random_spd_log(p, 1e-2, 1e2, rng), su};
      const Decomposition d = decomposition_check(m, r, e, tc);
      CHECK(d.identity_residual <= 1e-9);
      CHECK(d.part_c >= -1e-9);
      CHECK(d.part_a >= d.part_a_bound - 1e-7);
      CHECK(d.part_b >= d.part_b_bound - 1e-7);
      if (k % 5 == 0) CHECK(std::abs(d.part_c) < 1e-12);
    }
  }
  SUBCASE("Kt_Y = K_Y gives part_c = 0") {
    const SourceModel m = scalar_model(1, 1, 3);
    const EntropyBundle b = gaussian_entropy_bundle(m, scalar_tc(4, 1));
    const Decomposition d = decompose(MuWeights(0.2, 0.3, 0.5), b, b.hY_U, b.hY_V);
    CHECK(d.part_c == 0.0);
    CHECK(d.identity_residual <= 1e-15);
  }
}

TEST_CASE("mixture entropy excess") {
  CHECK(mixture_entropy_excess(0.0) == 0.0);
  // Well separated components add exactly one bit of uncertainty.
  CHECK(std::abs(mixture_entropy_excess(15.0) - std::numbers::ln2) < 1e-9);
  double prev = 0.0;
  for (int i = 1; i <= 40; ++i) {
    const double v = mixture_entropy_excess(0.25 * i);
    CHECK(v >= prev - 1e-13);
    CHECK(v <= std::numbers::ln2 + 1e-12);
    prev = v;
  }
  CHECK(std::abs(mixture_entropy_excess(1.3, 4096) - mixture_entropy_excess(1.3, 2048)) < 1e-12);
}

TEST_CASE("mixture auxiliaries") {
  const SourceModel m = scalar_model(1.3, 0.7, 2.1);
  // a = 0 is the Gaussian channel.
  const MixtureChannel plain{0.8, 1.5, 0.0};
  const EntropyBundle g = gaussian_entropy_bundle(m, scalar_tc(0.8 + 1.5, 0.8));
  const EntropyBundle mix = mixture_entropy_bundle(m, plain);
  // Noise 0.8 on X of variance 1.3 is the same as cond_cov-based entropies.
  CHECK(bundle_max_diff(g, mix) < 1e-12);

  double err = 0.0;
  const EntropyBundle b = mixture_entropy_bundle(m, MixtureChannel{0.5, 0.2, 1.7}, &err);
  CHECK(err < 1e-5);
  CHECK(b.hX_U <= b.hX_V + 1e-12);

  const SolveResult r = solve_mu_sum(m, MuWeights(0.6, 0.3, 0.4), tight_options());
  REQUIRE(r.converged);
  const MixtureScan scan = scan_mixture(m, r, 400, 3);
  CHECK(scan.min_gap >= -1e-3);
  CHECK(scan.max_quad_error <= 1e-5);
  const MixtureScan serial = scan_mixture(m, r, 400, 3, Execution::serial);
  CHECK(serial.min_gap == scan.min_gap);
  Rng rng(1);
  CHECK_THROWS_AS(scan_mixture(random_model(2, rng), r, 10, 1), DimensionMismatch);
}
