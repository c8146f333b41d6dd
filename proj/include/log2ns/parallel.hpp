#pragma once

#include <cstddef>
#if defined(_OPENMP)
#include <omp.h>
#endif

namespace log2ns {

// Thread count for the OpenMP kernels. 0 means "whatever OpenMP picks";
// 1 forces the serial path.
struct Parallelism {
  int threads = 0;

  static Parallelism serial() { return {1}; }

  int resolved() const {
#if defined(_OPENMP)
    return threads > 0 ? threads : omp_get_max_threads();
#else
    return 1;
#endif
  }
};

// Runs f(i) for i in [begin, end). Iterations must be independent.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, Parallelism par, F&& f) {
  const int n_threads = par.resolved();
#if defined(_OPENMP)
  if (n_threads > 1 && !omp_in_parallel() && end > begin + 1) {
    const auto n = static_cast<long long>(end - begin);
#pragma omp parallel for schedule(static) num_threads(n_threads)
    for (long long i = 0; i < n; ++i) f(begin + static_cast<std::size_t>(i));
    return;
  }
#endif
  (void)n_threads;
  for (std::size_t i = begin; i < end; ++i) f(i);
}

}  // namespace log2ns
