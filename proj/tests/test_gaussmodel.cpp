#include <cmath>

#include "doctest.h"
#include "keyrate/gaussmodel.hpp"
#include "test_util.hpp"

using namespace keyrate;
using keyrate::testing::max_abs_diff;
using keyrate::testing::random_model;
using keyrate::testing::random_splitting;
using keyrate::testing::scalar_model;

namespace {
// High-precision reference values for K=1, K_Y=1, K_Z=3.
constexpr double kKeyRef = 0.0770753399136292;  // 1/2 ln(2/1.5) - 1/2 ln(4/3.5)
constexpr double kSumRef = 0.202732554054082;   // 1/2 ln(1/0.5) - 1/2 ln(2/1.5)

GaussTestChannels scalar_tc(double sv, double su) {
  return GaussTestChannels{SymMatrix::diagonal({sv}), SymMatrix::diagonal({su})};
}
}  // namespace

TEST_CASE("SourceModel validation") {
  CHECK_THROWS_AS(scalar_model(0.0, 1.0, 1.0), InvalidModel);
  CHECK_THROWS_AS(scalar_model(1.0, -1.0, 1.0), InvalidModel);
  CHECK_THROWS_AS(SourceModel(SymMatrix::identity(2), SymMatrix::identity(1), SymMatrix::identity(2)),
                  DimensionMismatch);
}

TEST_CASE("cond_cov") {
  const SourceModel m = scalar_model(1, 1, 3);
  CHECK(cond_cov(m, SymMatrix::diagonal({1e12}))(0, 0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(cond_cov(m, SymMatrix::diagonal({1}))(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  const SourceModel d(SymMatrix::diagonal({1, 2}), SymMatrix::identity(2), SymMatrix::identity(2));
  CHECK(max_abs_diff(cond_cov(d, SymMatrix::diagonal({1, 2})), SymMatrix::diagonal({0.5, 1.0})) < 1e-15);
}

TEST_CASE("test-channel rates") {
  const SourceModel m = scalar_model(1, 1, 3);
  CHECK(std::abs(rate_I1(m, scalar_tc(1e12, 1)) - kKeyRef) < 1e-11);
  CHECK(std::abs(rate_I2(m, scalar_tc(1e12, 1)) - kSumRef) < 1e-14);
  CHECK(std::abs(rate_I3(m, scalar_tc(3, 1)) - kKeyRef) < 1e-14);
  CHECK(std::abs(rate_I2(scalar_model(1, 1e12, 3), scalar_tc(1e12, 1)) - 0.5 * std::log(2.0)) < 1e-11);
  CHECK(std::abs(rate_I2(m, scalar_tc(1e12, 1e12))) < 1e-11);
  CHECK(std::abs(rate_I3(m, scalar_tc(1e12, 1))) < 1e-11);
  CHECK(rate_I1(scalar_model(1, 2, 2), scalar_tc(4, 1)) == 0.0);
  CHECK(std::abs(rate_I1(m, scalar_tc(2, 2))) < 1e-15);
  CHECK(rate_I3(m, scalar_tc(2, 2)) == rate_I2(m, scalar_tc(2, 2)));
  CHECK_THROWS_AS(rate_I1(m, scalar_tc(1, 2)), OrderViolation);
}

TEST_CASE("region_point") {
  const SourceModel m = scalar_model(1, 1, 3);
  const RegionPoint zero = region_point(m, Splitting{SymMatrix::zero(1), SymMatrix::zero(1)});
  CHECK(std::abs(zero.key) < 1e-15);
  CHECK(std::abs(zero.sum) < 1e-15);
  CHECK(std::abs(zero.pub) < 1e-15);
  const RegionPoint r = region_point(m, Splitting{SymMatrix::zero(1), SymMatrix::diagonal({0.5})});
  CHECK(std::abs(r.key - kKeyRef) < 1e-14);
  CHECK(std::abs(r.sum - kSumRef) < 1e-14);
  CHECK(std::abs(r.pub) < 1e-15);
  CHECK_THROWS_AS(region_point(m, Splitting{SymMatrix::diagonal({0.6}), SymMatrix::diagonal({0.6})}),
                  InfeasibleSplitting);
  CHECK_THROWS_AS(region_point(m, Splitting{SymMatrix::diagonal({0.5}), SymMatrix::diagonal({0.5})}),
                  InfeasibleSplitting);
}

TEST_CASE("test channels and splittings") {
  const SourceModel m = scalar_model(1, 1, 3);
  const Splitting s = splitting_from_testchannels(m, scalar_tc(1, 1.0 / 3.0));
  CHECK(s.B1(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s.B2(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(splitting_from_testchannels(m, scalar_tc(2, 2)).B2(0, 0) == 0.0);
  CHECK(std::abs(splitting_from_testchannels(m, scalar_tc(1e12, 1)).B1(0, 0)) < 1e-11);
}

TEST_CASE("round trip, monotonicity and sign properties") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + trial % 4;
    const bool degraded = trial % 2 == 0;
    const SourceModel m = random_model(p, rng, degraded);

    // Round trip through test channels.
    const SymMatrix su = random_spd(p, 0.1, 5.0, rng);
    const SymMatrix sv = su + random_spd(p, 0.0, 5.0, rng);
    const GaussTestChannels tc{sv, su};
    const RegionPoint r = region_point(m, splitting_from_testchannels(m, tc));
    CHECK(std::abs(r.key - rate_I1(m, tc)) < 1e-9);
    CHECK(std::abs(r.sum - rate_I2(m, tc)) < 1e-9);
    CHECK(std::abs(r.pub - rate_I3(m, tc)) < 1e-9);

    // And back from splittings.
    const Splitting s = random_splitting(m, rng);
    const GaussTestChannels back = testchannels_from_splitting(m, s);
    const Splitting again = splitting_from_testchannels(m, back);
    CHECK(max_abs_diff(again.B1, s.B1) < 1e-8);
    CHECK(max_abs_diff(again.B2, s.B2) < 1e-8);

    const RegionPoint base = region_point(m, s);
    CHECK(base.sum >= -1e-10);
    CHECK(base.pub >= -1e-10);
    if (degraded) CHECK(base.key >= -1e-10);

    // Shrinking B2 (or B1) toward zero keeps feasibility.
    const double shrink = uniform(rng, 0.0, 1.0);
    CHECK(region_point(m, Splitting{s.B1, shrink * s.B2}).sum <= base.sum + 1e-12);
    CHECK(region_point(m, Splitting{shrink * s.B1, s.B2}).pub <= base.pub + 1e-12);

    const SourceModel same(m.K(), m.KY(), m.KY());
    CHECK(std::abs(region_point(same, s).key) < 1e-12);
  }
}
