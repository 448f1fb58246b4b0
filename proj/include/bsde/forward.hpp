#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bsde/exec.hpp"

namespace bsde {

enum class Scheme { Euler, LogEuler };

// Forward SDE: dS = b(t, S) dt + sigma(t, S) dW, S_0 given.
struct MarketModel {
    std::size_t dim_d = 1; // state dimension
    std::size_t dim_q = 1; // Brownian dimension
    std::vector<double> initial_state;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> drift;
    // out is d x q, row-major
    std::function<void(double t, std::span<const double> x, std::span<double> out)> diffusion;

    struct BlackScholesParams {
        double mu = 0.0;
        double sigma = 0.0;
    };
    // Set for the scalar Black-Scholes factory; required by the log-price scheme.
    std::optional<BlackScholesParams> black_scholes;

    // dS = S (mu dt + sigma dW), one asset, one Brownian driver.
    static MarketModel make_black_scholes(double mu, double sigma, double s0);
};

enum class AugmentationKind { Vanilla, AsianRunningAverage, AsianCorrected, LookbackMinMax };

std::size_t augmented_dim(AugmentationKind kind, std::size_t dim_d);

// M simulated forward paths on the grid t_k = k h, with the Brownian
// increments that drove them and the augmented Markov states read by
// path-dependent payoffs. Arrays are step-major: all paths of step k are
// contiguous.
struct PathEnsemble {
    std::size_t n_steps = 0; // N
    std::size_t n_paths = 0; // M
    std::size_t dim_d = 0;
    std::size_t dim_q = 0;
    std::size_t aug_dim = 0; // d'
    double step_h = 0.0;
    AugmentationKind kind = AugmentationKind::Vanilla;

    std::vector<double> increments; // (k * M + m) * q + l,  k in [0, N)
    std::vector<double> states; // (k * M + m) * d + j,  k in [0, N]
    std::vector<double> augmented; // (k * M + m) * d' + j, k in [0, N]

    std::span<const double> incr(std::size_t k, std::size_t m) const {
        return {increments.data() + (k * n_paths + m) * dim_q, dim_q};
    }
    std::span<const double> state(std::size_t k, std::size_t m) const {
        return {states.data() + (k * n_paths + m) * dim_d, dim_d};
    }
    std::span<const double> aug(std::size_t k, std::size_t m) const {
        return {augmented.data() + (k * n_paths + m) * aug_dim, aug_dim};
    }

    // Type invariants: initial states equal S_0 everywhere, and the first d
    // augmented coordinates reproduce the states. Throws on violation.
    void validate() const;
};

// Independent N(0, h) increments, M x N x q, step-major like PathEnsemble.
// Path m draws from its own generator keyed by (seed, m), so output does not
// depend on thread count or execution order.
std::vector<double> draw_increments(std::size_t n_steps, std::size_t n_paths,
    std::size_t dim_q, double step_h, std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

PathEnsemble simulate(const MarketModel& model, Scheme scheme, std::size_t n_steps,
    std::size_t n_paths, double maturity, std::uint64_t seed,
    ExecMode mode = ExecMode::Parallel);

// Same scheme driven by caller-supplied increments (step-major, N x M x q).
PathEnsemble simulate_with_increments(const MarketModel& model, Scheme scheme,
    std::size_t n_steps, std::size_t n_paths, double maturity,
    std::vector<double> increments, ExecMode mode = ExecMode::Parallel);

// Rebuild the augmented state P from the simulated states. mu and sigma are
// only read by the corrected Asian average. Requires dim_d == 1 for the
// Asian and lookback kinds.
PathEnsemble augment(AugmentationKind kind, const PathEnsemble& ensemble, double mu = 0.0,
    double sigma = 0.0, ExecMode mode = ExecMode::Parallel);

} // namespace bsde
