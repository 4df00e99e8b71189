#include <cmath>

#include "doctest.h"
#include "keyrate/matcore.hpp"
#include "keyrate/sampling.hpp"
#include "test_util.hpp"

using namespace keyrate;
using keyrate::testing::max_abs_diff;

namespace {
const SymMatrix kTwoOne = SymMatrix::from_rows({{2, 1}, {1, 2}});
}

TEST_CASE("SymMatrix construction") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 0, 1;
  const SymMatrix s(m);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(1, 0) == 1.0);
  CHECK_THROWS_AS(SymMatrix(Eigen::MatrixXd(2, 3)), InvalidMatrix);
  CHECK_THROWS_AS(SymMatrix(Eigen::MatrixXd(0, 0)), InvalidMatrix);
  m(0, 0) = std::nan("");
  CHECK_THROWS_AS(SymMatrix{m}, InvalidMatrix);
  CHECK_THROWS_AS(SymMatrix::from_rows({{1, 2}, {3}}), InvalidMatrix);
  CHECK_THROWS_AS(SymMatrix::identity(2) + SymMatrix::identity(3), DimensionMismatch);
}

TEST_CASE("logdet") {
  CHECK(logdet(SymMatrix::identity(3)) == doctest::Approx(0.0));
  CHECK(logdet(SymMatrix::diagonal({2, 0.5})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(logdet(kTwoOne) - std::log(3.0)) < 1e-14);
  CHECK_THROWS_AS(logdet(SymMatrix::diagonal({1, -1})), NotPositiveDefinite);
  CHECK_THROWS_AS(logdet(SymMatrix::zero(2)), NotPositiveDefinite);
  CHECK_FALSE(try_logdet(SymMatrix::diagonal({1, 0})).has_value());
}

TEST_CASE("eigenvalues") {
  CHECK(min_eig(SymMatrix::identity(2)) == 1.0);
  CHECK(min_eig(SymMatrix::diagonal({3, -1})) == doctest::Approx(-1.0));
  CHECK(min_eig(kTwoOne) == doctest::Approx(1.0));
  CHECK(max_eig(kTwoOne) == doctest::Approx(3.0));
}

TEST_CASE("loewner_leq") {
  CHECK(loewner_leq(SymMatrix::zero(2), SymMatrix::identity(2), 1e-9));
  CHECK_FALSE(loewner_leq(SymMatrix::identity(2), SymMatrix::zero(2), 1e-9));
  CHECK(loewner_leq(SymMatrix::identity(2), kTwoOne, 1e-9));
  CHECK_THROWS_AS(loewner_leq(SymMatrix::identity(2), SymMatrix::identity(3), 1e-9), DimensionMismatch);
}

TEST_CASE("project_psd") {
  CHECK(max_abs_diff(project_psd(SymMatrix::diagonal({1, -2})), SymMatrix::diagonal({1, 0})) < 1e-15);
  const SymMatrix flip = SymMatrix::from_rows({{0, 1}, {1, 0}});
  CHECK(max_abs_diff(project_psd(flip), SymMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}})) < 1e-14);
  CHECK(max_abs_diff(project_psd(kTwoOne), kTwoOne) < 1e-14);
}

TEST_CASE("inv") {
  CHECK(max_abs_diff(inv(SymMatrix::identity(3)), SymMatrix::identity(3)) == 0.0);
  CHECK(max_abs_diff(inv(SymMatrix::diagonal({2, 4})), SymMatrix::diagonal({0.5, 0.25})) < 1e-15);
  const SymMatrix expect = (1.0 / 3.0) * SymMatrix::from_rows({{2, -1}, {-1, 2}});
  CHECK(max_abs_diff(inv(kTwoOne), expect) < 1e-15);
  CHECK_THROWS_AS(inv(SymMatrix::diagonal({1, 0})), NotPositiveDefinite);
}

TEST_CASE("properties over random symmetric matrices") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + trial % 5;
    const Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(p, p, [&] { return uniform(rng, -3.0, 3.0); });
    const SymMatrix m(raw);

    const SymMatrix pm = project_psd(m);
    CHECK(min_eig(pm) >= -1e-12);
    CHECK(max_abs_diff(project_psd(pm), pm) < 1e-12);
    // Nearest-point property: no random PSD matrix is closer.
    const SymMatrix other = random_spd(p, 0.0, 3.0, rng);
    CHECK((m - pm).frobenius() <= (m - other).frobenius() + 1e-12);

    const SymMatrix a = random_spd(p, 0.1, 4.0, rng);
    const SymMatrix b = random_spd(p, 0.1, 4.0, rng);
    CHECK(std::abs(logdet(congruence(cholesky_lower(a), b)) - logdet(a) - logdet(b)) < 1e-10);
    CHECK(max_abs_diff(inv(inv(a)), a) < 1e-9 * (1.0 + a.frobenius()));
    CHECK(std::abs(logdet(inv(a)) + logdet(a)) < 1e-10);

    const double tol = 1e-9;
    const SymMatrix c = a + random_spd(p, 0.0, 1.0, rng);
    const SymMatrix d = c + random_spd(p, 0.0, 1.0, rng);
    CHECK(loewner_leq(a, c, tol));
    CHECK(loewner_leq(c, d, tol));
    CHECK(loewner_leq(a, d, 2 * tol));
  }
}
