#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace epismc {

// Number of workers OpenMP would give us; 1 when built without OpenMP.
inline int hardware_workers() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs fn(i) for i in [0, n). threads <= 1 runs the plain serial loop,
// which is the reference path the tests compare against. Each iteration
// must only touch its own slot; all randomness must come from keys derived
// from i, so the result is identical for every thread count.
template <class Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
#ifdef _OPENMP
  if (threads != 1 && !omp_in_parallel()) {
    const int team = threads <= 0 ? omp_get_max_threads() : threads;
#pragma omp parallel for schedule(static) num_threads(team)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace epismc
