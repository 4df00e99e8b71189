#pragma once

// Finite-alphabet evaluation of the single-letter key-rate region
//
//   R_K - R2 <= I(U;Y|V) - I(U;Z|V),  R1 + R2 >= I(U;X|Y),  R1 >= I(V;X|Y)
//
// for V -> U -> X -> (Y, Z), plus the layered binning rate allocation that
// achieves it. All quantities in nats.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "keyrate/parallel.hpp"

namespace keyrate {

class InvalidPmf : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// p(x, y, z) stored with z fastest: index (x * card_y + y) * card_z + z.
struct DiscreteSource {
  int card_x = 0;
  int card_y = 0;
  int card_z = 0;
  std::vector<double> pxyz;

  double p(int x, int y, int z) const { return pxyz[static_cast<std::size_t>((x * card_y + y) * card_z + z)]; }
};

/// p(u|x) is card_x x card_u, p(v|u) is card_u x card_v; rows are pmfs.
struct AuxChannels {
  int card_u = 0;
  int card_v = 0;
  Eigen::MatrixXd pu_given_x;
  Eigen::MatrixXd pv_given_u;
};

/// Throws InvalidPmf on negative entries, wrong sizes or sums off by more
/// than 1e-12.
void validate(const DiscreteSource& src);
void validate(const DiscreteSource& src, const AuxChannels& aux);

/// X ~ Bern(1/2), Y = X xor Bern(ey), Z = X xor Bern(ez), independent flips.
DiscreteSource binary_symmetric_source(double ey, double ez);

/// Scalar Gaussian model quantized on the 8-level Lloyd-Max cells of each
/// marginal.
DiscreteSource quantized_gaussian_source(double k, double ky, double kz);

struct RateTriple {
  double key_term = 0.0;
  double sum_term = 0.0;
  double pub_term = 0.0;
};

/// Mutual-information terms of one auxiliary pair.
struct AuxInfo {
  RateTriple triple;
  double I_UY_V = 0.0;   // I(U;Y|V)
  double I_UZ_V = 0.0;   // I(U;Z|V)
  double I_UX_YV = 0.0;  // I(U;X|Y,V)
  double I_VX = 0.0;     // I(V;X)
  double I_UX_V = 0.0;   // I(U;X|V)
  double I_VY = 0.0;     // I(V;Y)
  double I_VZ = 0.0;     // I(V;Z)
  double H_U_ZV = 0.0;   // H(U|Z,V)
  double H_U_YV = 0.0;   // H(U|Y,V)
};

AuxInfo aux_info(const DiscreteSource& src, const AuxChannels& aux);
RateTriple rate_triple(const DiscreteSource& src, const AuxChannels& aux);

/// U' = (U, V) and constant V'. Changes key_term by I(V;Y) - I(V;Z) and sets
/// pub_term to 0.
AuxChannels normalize_aux(const AuxChannels& aux);

/// U = X, V constant.
AuxChannels identity_aux(int card_x);

/// Sampled inner approximation of the region with |U| <= card_u, |V| <= card_v,
/// Pareto-filtered (max key, min sum, min pub) and sorted lexicographically.
/// Samples cycle through effective cardinalities (u', v'); each sample's
/// channel depends only on (seed, u', v', round), so larger budgets search a
/// superset. Deterministic channels are added whenever there are at most 4096
/// of them for an effective cardinality.
std::vector<RateTriple> inner_region(const DiscreteSource& src, int card_u, int card_v, std::int64_t n_samples,
                                     std::uint64_t seed, Execution ex = Execution::parallel);

/// Non-dominated subset with tolerance, sorted lexicographically.
std::vector<RateTriple> pareto_filter(std::vector<RateTriple> pts, double tol = 1e-9);

enum class AllocationCase { separate, layered };

struct RateAllocation {
  double R11 = 0.0;
  double R12 = 0.0;
  double R21 = 0.0;
  double R22 = 0.0;
  double R_V = 0.0;
  double R_U = 0.0;
  double R_K1 = 0.0;
  bool feasible = false;
  AllocationCase alloc_case = AllocationCase::layered;
  double achieved_key = 0.0;
};

/// Layered superposition binning with public rate R1 and private rate R2.
/// Each strict decoding or leakage inequality is required to hold with
/// margin `slack`, and the allocated rates carry enough margin for that.
RateAllocation binning_allocation(const DiscreteSource& src, const AuxChannels& aux, double R1, double R2,
                                  double slack = 1e-3);

}  // namespace keyrate
