#include "bsde/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bsde/numkit.hpp"

namespace bsde {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

BackwardResult reference_backward_solve(const SolverConfig& config,
    const PathEnsemble& ensemble, const BasisFamily& basis, const DriverFn& driver,
    const PayoffFn& payoff) {
    if (config.n_steps != ensemble.n_steps || config.n_paths != ensemble.n_paths) {
        throw std::invalid_argument("reference solve: config does not match the ensemble");
    }
    if (config.picard_iters < 1) {
        throw std::invalid_argument("reference solve: need at least one Picard iteration");
    }

    const std::size_t m_count = ensemble.n_paths;
    const std::size_t big_n = ensemble.n_steps;
    const std::size_t q = basis.n_brownian();
    const double h = ensemble.step_h;
    const double sqrt_h = std::sqrt(h);

    std::vector<double> y_next(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        y_next[m] = payoff(ensemble.aug(big_n, m));
        if (!std::isfinite(y_next[m])) {
            throw std::invalid_argument("reference solve: payoff produced a non-finite value");
        }
    }

    TruncationProfile profile;
    profile.policy = config.trunc_policy;
    if (config.trunc_policy == TruncationPolicy::PayoffScaled) {
        double mx = 0.0;
        for (double v : y_next) mx = std::max(mx, std::abs(v));
        profile.c0 = 10.0 * std::max(1.0, mx);
    } else if (config.trunc_policy == TruncationPolicy::Fixed) {
        if (!(config.trunc_c0 > 0.0)) {
            throw std::invalid_argument("reference solve: fixed truncation needs C_0 > 0");
        }
        profile.c0 = config.trunc_c0;
    }

    BackwardResult result;
    result.truncation = profile;
    result.coefficients.steps.resize(big_n);
    result.diagnostics.picard_gaps.resize(big_n);

    for (std::size_t k = big_n; k-- > 0;) {
        const std::size_t n0 = basis.size(0, k);
        std::size_t n_theta = n0;
        for (std::size_t l = 1; l <= q; ++l) n_theta += basis.size(l, k);

        DesignMatrix design(m_count, n_theta);
        for (std::size_t m = 0; m < m_count; ++m) {
            const auto row = regression_row(ensemble, basis, k, m);
            std::copy(row.begin(), row.end(), design.row(m).begin());
        }

        const double t = h * static_cast<double>(k);
        std::vector<double> theta(n_theta, 0.0), b(m_count);
        std::vector<double> z(q);
        auto& gaps = result.diagnostics.picard_gaps[k];

        std::vector<double> feat;
        for (int i = 1; i <= config.picard_iters; ++i) {
            for (std::size_t m = 0; m < m_count; ++m) {
                const auto x = ensemble.aug(k, m);
                feat.resize(n0);
                basis.regression_features_into(0, k, x, feat);
                const double y = dot({theta.data(), n0}, feat);
                std::size_t off = n0;
                for (std::size_t l = 1; l <= q; ++l) {
                    const std::size_t nl = basis.size(l, k);
                    feat.resize(nl);
                    basis.regression_features_into(l, k, x, feat);
                    z[l - 1] = dot({theta.data() + off, nl}, feat) / sqrt_h;
                    off += nl;
                }
                b[m] = y_next[m] + h * driver(t, ensemble.state(k, m), y, z);
            }
            const auto sol = solve_min_norm(design, b, config.rank_tol);
            double g2 = 0.0;
            for (std::size_t j = 0; j < n_theta; ++j) {
                const double d = sol.coefficients[j] - theta[j];
                g2 += d * d;
            }
            gaps.push_back(std::sqrt(g2));
            theta = sol.coefficients;
        }

        auto& step = result.coefficients.steps[k];
        step.alpha.resize(q + 1);
        step.alpha[0].assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n0));
        std::size_t off = n0;
        for (std::size_t l = 1; l <= q; ++l) {
            const std::size_t nl = basis.size(l, k);
            step.alpha[l].assign(theta.begin() + static_cast<std::ptrdiff_t>(off),
                theta.begin() + static_cast<std::ptrdiff_t>(off + nl));
            for (double& v : step.alpha[l]) v /= sqrt_h;
            off += nl;
        }

        if (k > 0) {
            const bool no_trunc = profile.policy == TruncationPolicy::None;
            for (std::size_t m = 0; m < m_count; ++m) {
                const auto x = ensemble.aug(k, m);
                feat.resize(n0);
                basis.regression_features_into(0, k, x, feat);
                const double y_raw = dot(step.alpha[0], feat);
                double n2 = 0.0;
                for (double v : feat) n2 += v * v;
                const double rho = no_trunc ? std::numeric_limits<double>::infinity()
                                            : std::max(1.0, profile.c0 * std::sqrt(n2));
                y_next[m] = smooth_truncate(y_raw, rho);
            }
        }
    }

    auto [y0, z0] = evaluate_yz(result.coefficients, profile, basis, 0, ensemble.aug(0, 0), h);
    result.y0 = y0;
    result.z0 = std::move(z0);
    return result;
}

} // namespace bsde
