#pragma once

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace freehand {

/// Worker count used when a caller passes 0.
inline int default_thread_count() {
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

inline int resolve_threads(int requested) {
  return requested > 0 ? requested : default_thread_count();
}

/// Runs body(i) for i in [0, count) on up to `threads` workers with a static
/// schedule. Bodies must only write to per-index state; callers combine
/// results afterwards in index order so output never depends on scheduling.
template <typename Body>
void parallel_for(int threads, long count, Body&& body) {
#ifdef _OPENMP
  if (threads > 1 && count > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
#endif
  for (long i = 0; i < count; ++i) body(i);
}

}  // namespace freehand
