#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They only use scalar closed forms and brute force, never the solver code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace keyrate::oracle {

struct ScalarInstance {
  double k, ky, kz;
  double mu1, mu2, mu3;
};

// Objective restricted to p = 1, term by term.
inline double log_term(double c, double x) {
  if (c == 0.0) return 0.0;
  return x > 0.0 ? c * std::log(x)
                 : (c < 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity());
}

inline double scalar_objective(const ScalarInstance& in, double b1, double b2) {
  const double s = b1 + b2;
  const auto term = log_term;
  return term(0.5 * (in.mu1 + in.mu2), in.k + in.ky - s) + term(-0.5 * in.mu1, in.k + in.kz - s) +
         term(-0.5 * in.mu2, in.k - s) + term(0.5 * in.mu1, in.k + in.kz - b1) +
         term(0.5 * (in.mu3 - in.mu1), in.k + in.ky - b1) + term(-0.5 * in.mu3, in.k - b1) +
         0.5 * (in.mu2 + in.mu3) * (std::log(in.k) - std::log(in.k + in.ky));
}

// Brute-force minimum over the grid b1, b2 in {0, h, 2h, ...}, b1 + b2 <= K,
// with h = K / n. Feasible points with K - b1 - b2 = 0 are included only
// when the objective is finite there.
inline double scalar_grid_min(const ScalarInstance& in, int n = 1000) {
  const double h = in.k / n;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j) {
      const double v = scalar_objective(in, i * h, j * h);
      if (std::isfinite(v) && v < best) best = v;
    }
  return best;
}

// Terms of the scalar objective that depend on s = b1 + b2 only and on b1
// only; scalar_objective(b1, b2) = sum_part(b1 + b2) + b1_part(b1).
inline double sum_part(const ScalarInstance& in, double s) {
  return log_term(0.5 * (in.mu1 + in.mu2), in.k + in.ky - s) + log_term(-0.5 * in.mu1, in.k + in.kz - s) +
         log_term(-0.5 * in.mu2, in.k - s);
}

inline double b1_part(const ScalarInstance& in, double b1) {
  return log_term(0.5 * in.mu1, in.k + in.kz - b1) + log_term(0.5 * (in.mu3 - in.mu1), in.k + in.ky - b1) +
         log_term(-0.5 * in.mu3, in.k - b1) + 0.5 * (in.mu2 + in.mu3) * (std::log(in.k) - std::log(in.k + in.ky));
}

// Exact minimum over the lattice b1 = i h, b1 + b2 = m h, 0 <= i <= m,
// m h <= K. The separable form turns the double loop into a suffix minimum.
inline double scalar_lattice_min(const ScalarInstance& in, double h) {
  const auto top = static_cast<long>(std::floor(in.k / h * (1.0 + 1e-12)));
  const auto n = static_cast<std::size_t>(top) + 1;
  std::vector<double> suffix(n + 1, std::numeric_limits<double>::infinity());
  for (std::size_t m = n; m-- > 0;) {
    const double a = sum_part(in, static_cast<double>(m) * h);
    suffix[m] = std::isfinite(a) ? std::min(a, suffix[m + 1]) : suffix[m + 1];
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = b1_part(in, static_cast<double>(i) * h) + suffix[i];
    if (std::isfinite(v) && v < best) best = v;
  }
  return best;
}

}  // namespace keyrate::oracle
