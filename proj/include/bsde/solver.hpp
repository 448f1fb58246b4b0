#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "bsde/bases.hpp"
#include "bsde/exec.hpp"
#include "bsde/finance.hpp"
#include "bsde/forward.hpp"

namespace bsde {

using DriverFn =
    std::function<double(double t, std::span<const double> x, double y, std::span<const double> z)>;
using PayoffFn = std::function<double(std::span<const double> terminal_state)>;

inline DriverFn driver_fn(const Driver& d) {
    return [d](double t, std::span<const double> x, double y, std::span<const double> z) {
        return eval_driver(d, t, x, y, z);
    };
}

inline PayoffFn payoff_fn(const Payoff& p) {
    return [p](std::span<const double> terminal) { return eval_payoff(p, terminal); };
}

// Smooth clamp: rho * xi(x / rho) with xi odd, C^2, xi(u) = u for |u| <= 3/2,
// |xi| <= 2 and |xi'| <= 1. Values within 1.5 rho pass through unchanged and
// nothing ever exceeds 2 rho in magnitude. rho = +infinity disables the clamp.
double smooth_truncate(double x, double rho);

enum class TruncationPolicy {
    PayoffScaled, // C_0 = 10 * max(1, max_m |payoff_m|), from the run's ensemble
    Fixed, // C_0 given explicitly
    None, // diagnostic mode: no clamping
};

struct TruncationProfile {
    TruncationPolicy policy = TruncationPolicy::PayoffScaled;
    double c0 = 1.0; // resolved constant (unused when policy == None)
};

// Clamp radius max(1, C_0 |p_{l,k}(x)|); +infinity when truncation is off.
double truncation_radius(const TruncationProfile& profile, const BasisFamily& basis,
    std::size_t l, std::size_t k, std::span<const double> x);

struct SolverConfig {
    std::size_t n_steps = 0; // N, must match the ensemble
    std::size_t n_paths = 0; // M, must match the ensemble
    int picard_iters = 3; // I
    double rank_tol = 1e-10;
    TruncationPolicy trunc_policy = TruncationPolicy::PayoffScaled;
    double trunc_c0 = 0.0; // read when trunc_policy == Fixed
    ExecMode mode = ExecMode::Parallel;
    bool collect_gram = false; // per-step design conditioning diagnostics
};

// Projection coefficients for one time step: alpha[l] has length n_{l,k}.
struct StepCoefficients {
    std::vector<std::vector<double>> alpha;
};

struct CoefficientSet {
    std::vector<StepCoefficients> steps; // index k in [0, N)
};

struct SolveDiagnostics {
    // picard_gaps[k][i-1] = |theta^i - theta^{i-1}| in the scaled coordinates
    std::vector<std::vector<double>> picard_gaps;
    // filled when collect_gram is set: (lambda_min, lambda_max) of the
    // empirical design Gram matrix at each step
    std::vector<std::pair<double, double>> gram_extremes;
};

struct BackwardResult {
    CoefficientSet coefficients;
    double y0 = 0.0;
    std::vector<double> z0;
    TruncationProfile truncation; // with the resolved constant
    SolveDiagnostics diagnostics;
};

// One row of the regression design at (k, m): the basis features for the
// y-block followed by, for each Brownian component l, the features scaled by
// dW_l / sqrt(h).
std::vector<double> regression_row(const PathEnsemble& ensemble, const BasisFamily& basis,
    std::size_t k, std::size_t m);

// Picard iterations of the per-step least-squares problem. target_next holds
// the regression target for every path: the truncated evaluation at k+1, or
// the terminal payoffs when k = N-1. The driver sees the raw (untruncated)
// current-step evaluations. Returns the iteration-I coefficients with the
// z-blocks unscaled.
StepCoefficients picard_sweep(const PathEnsemble& ensemble, const BasisFamily& basis,
    std::size_t k, std::span<const double> target_next, const DriverFn& driver,
    int picard_iters, double rank_tol, ExecMode mode = ExecMode::Parallel);

// Full backward-in-time solve. Deterministic given (config, ensemble, basis).
BackwardResult backward_solve(const SolverConfig& config, const PathEnsemble& ensemble,
    const BasisFamily& basis, const DriverFn& driver, const PayoffFn& payoff);

// Truncated evaluation of (Y, Z) at an arbitrary state x at step k.
std::pair<double, std::vector<double>> evaluate_yz(const CoefficientSet& coefficients,
    const TruncationProfile& profile, const BasisFamily& basis, std::size_t k,
    std::span<const double> x, double step_h);

} // namespace bsde
