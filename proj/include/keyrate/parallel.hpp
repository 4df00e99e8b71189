#pragma once

// Min-reduction over an index range. The serial loop is the reference; the
// OpenMP path must return the identical (value, index) pair because ties are
// broken by the smaller index.

#include <cstdint>
#include <limits>

#include <omp.h>

namespace keyrate {

enum class Execution { serial, parallel };

struct IndexedMin {
  double value = std::numeric_limits<double>::infinity();
  std::int64_t index = -1;

  void merge(double v, std::int64_t i) {
    if (v < value || (v == value && (index < 0 || i < index))) {
      value = v;
      index = i;
    }
  }
};

template <class Fn>
IndexedMin min_over_range(std::int64_t n, Fn&& fn, Execution ex) {
  IndexedMin best;
  if (ex == Execution::serial) {
    for (std::int64_t i = 0; i < n; ++i) best.merge(fn(i), i);
    return best;
  }
#pragma omp parallel
  {
    IndexedMin local;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) local.merge(fn(i), i);
#pragma omp critical(keyrate_min_merge)
    if (local.index >= 0) best.merge(local.value, local.index);
  }
  return best;
}

}  // namespace keyrate
