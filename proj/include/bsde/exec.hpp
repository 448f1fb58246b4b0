#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsde {

// Execution mode for the data-parallel kernels. Every kernel produces
// bit-identical results in both modes: parallel loops only ever write
// disjoint slots, so the arithmetic is the same either way.
enum class ExecMode { Serial, Parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace bsde
