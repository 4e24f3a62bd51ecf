#pragma once

#include <cstddef>
#include <vector>

#ifdef SPHERECONE_HAVE_OPENMP
#include <omp.h>
#endif

// Shared OpenMP layer. Every kernel that uses parallel_for also has a serial
// reference path, selected at runtime, so tests can compare the two and the
// bench tool can time them.

namespace spherecone::par {

inline bool& parallel_enabled() {
    static bool enabled = true;
    return enabled;
}

inline void set_parallel(bool on) { parallel_enabled() = on; }

inline int thread_count() {
#ifdef SPHERECONE_HAVE_OPENMP
    return parallel_enabled() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef SPHERECONE_HAVE_OPENMP
    if (parallel_enabled()) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            fn(static_cast<std::size_t>(i));
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

// Deterministic reduction: per-thread partials combined in index order.
template <class Fn>
double parallel_sum(std::size_t n, Fn&& term) {
#ifdef SPHERECONE_HAVE_OPENMP
    if (parallel_enabled()) {
        const int nt = omp_get_max_threads();
        std::vector<double> partial(static_cast<std::size_t>(nt), 0.0);
#pragma omp parallel
        {
            const int t = omp_get_thread_num();
            double acc = 0.0;
#pragma omp for schedule(static)
            for (long long i = 0; i < static_cast<long long>(n); ++i)
                acc += term(static_cast<std::size_t>(i));
            partial[static_cast<std::size_t>(t)] = acc;
        }
        double total = 0.0;
        for (double p : partial) total += p;
        return total;
    }
#endif
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += term(i);
    return total;
}

} // namespace spherecone::par
