#include "bsdh/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsdh {

namespace {
int g_threads = 0;
}

void set_threads(int n) {
    g_threads = n < 0 ? 0 : n;
#ifdef _OPENMP
    if (g_threads > 0) omp_set_num_threads(g_threads);
#endif
}

int configured_threads() { return g_threads; }

bool parallel_enabled() {
#ifdef _OPENMP
    return g_threads != 1;
#else
    return false;
#endif
}

} // namespace bsdh
