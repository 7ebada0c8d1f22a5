#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gpsimp {

/// Environment variable consulted by configure_threads().
inline constexpr const char* kThreadsEnvVar = "GPSIMP_NUM_THREADS";

/// Applies GPSIMP_NUM_THREADS (if set and positive) and returns the thread
/// count that parallel loops will use. Without OpenMP this is always 1.
inline int configure_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    try {
      int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (...) {
      // ignore unparsable values, keep the runtime default
    }
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace gpsimp
