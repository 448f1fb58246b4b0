#pragma once

#include "bsde/solver.hpp"

namespace bsde {

// Serial reference implementation of the backward regression scheme. Always
// assembles the full stacked design and refactorizes it for every Picard
// iteration, with no per-cell decomposition and no threading. The production
// solver is tested against it; the kernel_bench tool times both.
BackwardResult reference_backward_solve(const SolverConfig& config,
    const PathEnsemble& ensemble, const BasisFamily& basis, const DriverFn& driver,
    const PayoffFn& payoff);

} // namespace bsde
