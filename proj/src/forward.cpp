#include "bsde/forward.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bsde/rng.hpp"

namespace bsde {

MarketModel MarketModel::make_black_scholes(double mu, double sigma, double s0) {
    if (!(s0 > 0.0)) throw std::invalid_argument("black_scholes: initial price must be > 0");
    if (!(sigma >= 0.0)) throw std::invalid_argument("black_scholes: sigma must be >= 0");
    MarketModel m;
    m.dim_d = 1;
    m.dim_q = 1;
    m.initial_state = {s0};
    m.drift = [mu](double, std::span<const double> x, std::span<double> out) {
        out[0] = mu * x[0];
    };
    m.diffusion = [sigma](double, std::span<const double> x, std::span<double> out) {
        out[0] = sigma * x[0];
    };
    m.black_scholes = BlackScholesParams{mu, sigma};
    return m;
}

std::size_t augmented_dim(AugmentationKind kind, std::size_t dim_d) {
    switch (kind) {
        case AugmentationKind::Vanilla:
            return dim_d;
        case AugmentationKind::AsianRunningAverage:
        case AugmentationKind::AsianCorrected:
            return dim_d + 1;
        case AugmentationKind::LookbackMinMax:
            return dim_d + 2;
    }
    throw std::invalid_argument("unknown augmentation kind");
}

void PathEnsemble::validate() const {
    for (std::size_t m = 0; m < n_paths; ++m) {
        for (std::size_t j = 0; j < dim_d; ++j) {
            if (state(0, m)[j] != state(0, 0)[j]) {
                throw std::logic_error("ensemble: initial states differ across paths");
            }
        }
        for (std::size_t k = 0; k <= n_steps; ++k) {
            for (std::size_t j = 0; j < dim_d; ++j) {
                if (aug(k, m)[j] != state(k, m)[j]) {
                    throw std::logic_error(
                        "ensemble: augmented state does not extend the raw state");
                }
            }
        }
    }
}

std::vector<double> draw_increments(std::size_t n_steps, std::size_t n_paths,
    std::size_t dim_q, double step_h, std::uint64_t seed, ExecMode mode) {
    if (n_steps < 1 || n_paths < 1 || dim_q < 1) {
        throw std::invalid_argument("draw_increments: dimensions must be >= 1");
    }
    if (!(step_h > 0.0)) {
        throw std::invalid_argument("draw_increments: step size must be > 0");
    }

    std::vector<double> out(n_steps * n_paths * dim_q);
    const double scale = std::sqrt(step_h);
    const bool par = mode == ExecMode::Parallel;

#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t m = 0; m < static_cast<std::int64_t>(n_paths); ++m) {
        NormalStream normals(derive_seed(seed, static_cast<std::uint64_t>(m)));
        for (std::size_t k = 0; k < n_steps; ++k) {
            double* slot = out.data() + (k * n_paths + static_cast<std::size_t>(m)) * dim_q;
            for (std::size_t l = 0; l < dim_q; ++l) slot[l] = scale * normals.next();
        }
    }
    return out;
}

PathEnsemble simulate_with_increments(const MarketModel& model, Scheme scheme,
    std::size_t n_steps, std::size_t n_paths, double maturity, std::vector<double> increments,
    ExecMode mode) {
    if (n_steps < 1 || n_paths < 1) {
        throw std::invalid_argument("simulate: dimensions must be >= 1");
    }
    if (!(maturity > 0.0)) throw std::invalid_argument("simulate: maturity must be > 0");
    if (model.initial_state.size() != model.dim_d) {
        throw std::invalid_argument("simulate: initial state has wrong dimension");
    }
    if (increments.size() != n_steps * n_paths * model.dim_q) {
        throw std::invalid_argument("simulate: increments array has wrong size");
    }
    if (scheme == Scheme::LogEuler && !model.black_scholes) {
        throw std::invalid_argument("simulate: log-price scheme requires a Black-Scholes model");
    }

    const std::size_t d = model.dim_d;
    const std::size_t q = model.dim_q;
    const double h = maturity / static_cast<double>(n_steps);

    PathEnsemble ens;
    ens.n_steps = n_steps;
    ens.n_paths = n_paths;
    ens.dim_d = d;
    ens.dim_q = q;
    ens.aug_dim = d;
    ens.step_h = h;
    ens.kind = AugmentationKind::Vanilla;
    ens.increments = std::move(increments);
    ens.states.resize((n_steps + 1) * n_paths * d);

    const bool par = mode == ExecMode::Parallel;

#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(n_paths); ++mi) {
        const auto m = static_cast<std::size_t>(mi);
        std::vector<double> x(model.initial_state);
        std::vector<double> b(d), sig(d * q);
        for (std::size_t j = 0; j < d; ++j) ens.states[(0 * n_paths + m) * d + j] = x[j];

        for (std::size_t k = 0; k < n_steps; ++k) {
            const double t = h * static_cast<double>(k);
            const double* dw = ens.increments.data() + (k * n_paths + m) * q;
            if (scheme == Scheme::Euler) {
                model.drift(t, x, b);
                model.diffusion(t, x, sig);
                for (std::size_t j = 0; j < d; ++j) {
                    double dx = b[j] * h;
                    for (std::size_t l = 0; l < q; ++l) dx += sig[j * q + l] * dw[l];
                    x[j] += dx;
                }
            } else {
                const auto& bs = *model.black_scholes;
                x[0] *= std::exp((bs.mu - 0.5 * bs.sigma * bs.sigma) * h + bs.sigma * dw[0]);
            }
            for (std::size_t j = 0; j < d; ++j) ens.states[((k + 1) * n_paths + m) * d + j] = x[j];
        }
    }

    ens.augmented = ens.states;
    return ens;
}

PathEnsemble simulate(const MarketModel& model, Scheme scheme, std::size_t n_steps,
    std::size_t n_paths, double maturity, std::uint64_t seed, ExecMode mode) {
    const double h = maturity / static_cast<double>(n_steps);
    auto dw = draw_increments(n_steps, n_paths, model.dim_q, h, seed, mode);
    return simulate_with_increments(model, scheme, n_steps, n_paths, maturity, std::move(dw),
        mode);
}

PathEnsemble augment(AugmentationKind kind, const PathEnsemble& ensemble, double mu,
    double sigma, ExecMode mode) {
    if (kind == AugmentationKind::Vanilla) {
        PathEnsemble out = ensemble;
        out.kind = kind;
        out.aug_dim = ensemble.dim_d;
        out.augmented = out.states;
        return out;
    }
    if (ensemble.dim_d != 1) {
        throw std::invalid_argument("augment: this augmentation requires a scalar state");
    }

    const std::size_t n = ensemble.n_steps;
    const std::size_t npaths = ensemble.n_paths;
    const std::size_t dp = augmented_dim(kind, 1);
    const double h = ensemble.step_h;

    PathEnsemble out = ensemble;
    out.kind = kind;
    out.aug_dim = dp;
    out.augmented.assign((n + 1) * npaths * dp, 0.0);

    const bool par = mode == ExecMode::Parallel;

#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(npaths); ++mi) {
        const auto m = static_cast<std::size_t>(mi);
        double run_sum = 0.0; // plain or corrected partial sum
        double run_min = 0.0, run_max = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            const double s = ensemble.state(k, m)[0];
            double* slot = out.augmented.data() + (k * npaths + m) * dp;
            slot[0] = s;
            switch (kind) {
                case AugmentationKind::AsianRunningAverage:
                    run_sum += s;
                    slot[1] = run_sum / static_cast<double>(k + 1);
                    break;
                case AugmentationKind::AsianCorrected:
                    if (k == 0) {
                        slot[1] = s;
                    } else {
                        const double dw = ensemble.incr(k - 1, m)[0];
                        run_sum += ensemble.state(k - 1, m)[0]
                            * (1.0 + 0.5 * mu * h + 0.5 * sigma * dw);
                        slot[1] = run_sum / static_cast<double>(k);
                    }
                    break;
                case AugmentationKind::LookbackMinMax:
                    if (k == 0) {
                        run_min = run_max = s;
                    } else {
                        run_min = std::min(run_min, s);
                        run_max = std::max(run_max, s);
                    }
                    slot[1] = run_min;
                    slot[2] = run_max;
                    break;
                case AugmentationKind::Vanilla:
                    break;
            }
        }
    }
    return out;
}

} // namespace bsde
