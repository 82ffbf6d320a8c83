#pragma once

// OpenMP shim. Use TSCC_OMP(...) for every pragma so the library also builds without OpenMP.

#define TSCC_PRAGMA(X) _Pragma(#X)

#ifdef _OPENMP
#include <omp.h>
#define TSCC_OMP(ARGS) TSCC_PRAGMA(omp ARGS)
#else
#define TSCC_OMP(ARGS)
#endif

namespace tscc {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline bool in_parallel_region() {
#ifdef _OPENMP
    return omp_in_parallel();
#else
    return false;
#endif
}

}  // namespace tscc
