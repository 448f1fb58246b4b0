#include "bsde/solver.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "bsde/numkit.hpp"

namespace bsde {

namespace {

// Odd C^2 clamp shape: identity on [-3/2, 3/2], saturating tanh tail beyond,
// value and first two derivatives match at the junction. |xi| < 2, 0 < xi' <= 1.
double xi(double u) {
    const double a = std::abs(u);
    if (a <= 1.5) return u;
    const double tail = 1.5 + 0.5 * std::tanh(2.0 * (a - 1.5));
    return u < 0.0 ? -tail : tail;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct StepLayout {
    std::vector<std::size_t> offset; // per l in [0, q]
    std::size_t n_theta = 0;
};

StepLayout make_layout(const BasisFamily& basis, std::size_t k) {
    const std::size_t q = basis.n_brownian();
    StepLayout lay;
    lay.offset.resize(q + 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l <= q; ++l) {
        lay.offset[l] = off;
        off += basis.size(l, k);
    }
    lay.n_theta = off;
    return lay;
}

// Design of one time step in the scaled coordinates
// theta = (alpha_0, sqrt(h) alpha_1, ..., sqrt(h) alpha_q), factorized once
// and reused across Picard iterations. Indicator-structured bases decompose
// into independent per-cell least-squares problems which share the global
// rank cutoff, so the result matches the stacked dense solve.
class StepDesign {
public:
    StepDesign(const PathEnsemble& ens, const BasisFamily& basis, std::size_t k, ExecMode mode)
        : ens_(ens),
          basis_(basis),
          k_(k),
          layout_(make_layout(basis, k)),
          par_(mode == ExecMode::Parallel),
          sqrt_h_(std::sqrt(ens.step_h)) {
        if (basis.indicator_structured()) {
            build_blocks();
        } else {
            build_dense();
        }
    }

    std::size_t n_theta() const { return layout_.n_theta; }

    double sigma_max() const {
        if (dense_factor_) return dense_factor_->max_singular_value();
        double s = 0.0;
        for (const auto& blk : blocks_) s = std::max(s, blk.factor->max_singular_value());
        return s;
    }

    std::vector<double> solve(std::span<const double> b, double rank_tol) const {
        if (dense_factor_) return dense_factor_->solve(b, rank_tol);

        const double cutoff = rank_tol * sigma_max();
        std::vector<double> theta(layout_.n_theta, 0.0);
        const std::size_t q = basis_.n_brownian();
        const std::size_t b0 = basis_.block_size(0);

#pragma omp parallel for if (par_) schedule(dynamic)
        for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(blocks_.size()); ++bi) {
            const auto& blk = blocks_[static_cast<std::size_t>(bi)];
            std::vector<double> local(blk.members.size());
            for (std::size_t r = 0; r < blk.members.size(); ++r) local[r] = b[blk.members[r]];
            const auto tc = blk.factor->solve_with_cutoff(local, cutoff);
            for (std::size_t j = 0; j < b0; ++j) theta[layout_.offset[0] + blk.cell * b0 + j] = tc[j];
            for (std::size_t l = 1; l <= q; ++l) theta[layout_.offset[l] + blk.cell] = tc[b0 + l - 1];
        }
        return theta;
    }

    // Per-path y = alpha_0 . p_0 and z_l = alpha_l . p_l from a theta vector.
    void eval_paths(std::span<const double> theta, std::span<double> y_out,
        std::span<double> z_out) const {
        const std::size_t m_count = ens_.n_paths;
        const std::size_t q = basis_.n_brownian();

        if (dense_factor_) {
#pragma omp parallel for if (par_) schedule(static)
            for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
                const auto m = static_cast<std::size_t>(mi);
                y_out[m] = dot({theta.data(), features_[0].cols}, features_[0].row(m));
                for (std::size_t l = 1; l <= q; ++l) {
                    z_out[m * q + l - 1] = dot(
                        {theta.data() + layout_.offset[l], features_[l].cols},
                        features_[l].row(m)) / sqrt_h_;
                }
            }
            return;
        }

        const std::size_t b0 = basis_.block_size(0);
#pragma omp parallel for if (par_) schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
            const auto m = static_cast<std::size_t>(mi);
            const std::size_t c = cell_[m];
            double blk[8]; // 1 + d' <= 8 for every supported basis
            basis_.block_values(0, ens_.aug(k_, m), {blk, b0});
            double y = 0.0;
            for (std::size_t j = 0; j < b0; ++j) y += theta[layout_.offset[0] + c * b0 + j] * blk[j];
            y_out[m] = y;
            for (std::size_t l = 1; l <= q; ++l) {
                z_out[m * q + l - 1] = theta[layout_.offset[l] + c] / sqrt_h_;
            }
        }
    }

    // |p_0(x_m)| per path, used for the truncation radii.
    void feature_norm0(std::span<double> out) const {
        const std::size_t m_count = ens_.n_paths;
        if (dense_factor_) {
#pragma omp parallel for if (par_) schedule(static)
            for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
                const auto m = static_cast<std::size_t>(mi);
                out[m] = norm2(features_[0].row(m));
            }
            return;
        }
        const std::size_t b0 = basis_.block_size(0);
#pragma omp parallel for if (par_) schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
            const auto m = static_cast<std::size_t>(mi);
            double blk[8];
            basis_.block_values(0, ens_.aug(k_, m), {blk, b0});
            out[m] = norm2({blk, b0});
        }
    }

    std::pair<double, double> gram_extremes() const {
        const double inv_m = 1.0 / static_cast<double>(ens_.n_paths);
        if (dense_factor_) {
            const auto& s = dense_factor_->singular_values();
            const double lmax = s.front() * s.front() * inv_m;
            const double lmin =
                ens_.n_paths < layout_.n_theta ? 0.0 : s.back() * s.back() * inv_m;
            return {lmin, lmax};
        }
        if (blocks_.empty()) return {0.0, 0.0};
        double lmax = 0.0;
        double lmin = std::numeric_limits<double>::infinity();
        std::size_t covered = 0;
        for (const auto& blk : blocks_) {
            const auto& s = blk.factor->singular_values();
            lmax = std::max(lmax, s.front() * s.front() * inv_m);
            const bool deficient = blk.members.size() < s.size();
            lmin = std::min(lmin, deficient ? 0.0 : s.back() * s.back() * inv_m);
            ++covered;
        }
        if (covered < basis_.n_cells(k_)) lmin = 0.0; // empty cells: zero columns
        return {lmin, lmax};
    }

private:
    struct Block {
        std::size_t cell = 0;
        std::vector<std::size_t> members;
        std::optional<SvdFactor> factor;
    };

    void build_blocks() {
        const std::size_t m_count = ens_.n_paths;
        const std::size_t q = basis_.n_brownian();
        const std::size_t n_cells = basis_.n_cells(k_);
        const std::size_t b0 = basis_.block_size(0);
        const std::size_t nb = b0 + q;
        if (b0 > 8) {
            throw std::invalid_argument("solver: local polynomial blocks support at most "
                                        "7 state variables");
        }

        cell_.resize(m_count);
#pragma omp parallel for if (par_) schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
            const auto m = static_cast<std::size_t>(mi);
            cell_[m] = basis_.nearest_cell(k_, ens_.aug(k_, m));
        }

        std::vector<std::size_t> count(n_cells, 0);
        for (std::size_t m = 0; m < m_count; ++m) ++count[cell_[m]];
        std::vector<std::size_t> block_of(n_cells, BasisFamily::npos);
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (count[c] == 0) continue;
            block_of[c] = blocks_.size();
            blocks_.push_back(Block{c, {}, std::nullopt});
            blocks_.back().members.reserve(count[c]);
        }
        for (std::size_t m = 0; m < m_count; ++m) {
            blocks_[block_of[cell_[m]]].members.push_back(m);
        }

#pragma omp parallel for if (par_) schedule(dynamic)
        for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(blocks_.size()); ++bi) {
            auto& blk = blocks_[static_cast<std::size_t>(bi)];
            DesignMatrix local(blk.members.size(), nb);
            for (std::size_t r = 0; r < blk.members.size(); ++r) {
                const std::size_t m = blk.members[r];
                basis_.block_values(0, ens_.aug(k_, m), {local.row(r).data(), b0});
                const auto dw = ens_.incr(k_, m);
                for (std::size_t l = 1; l <= q; ++l) {
                    local.at(r, b0 + l - 1) = dw[l - 1] / sqrt_h_;
                }
            }
            blk.factor.emplace(local);
        }
    }

    void build_dense() {
        const std::size_t m_count = ens_.n_paths;
        const std::size_t q = basis_.n_brownian();
        for (std::size_t l = 0; l <= q; ++l) {
            features_.emplace_back(m_count, basis_.size(l, k_));
        }
        DesignMatrix design(m_count, layout_.n_theta);

#pragma omp parallel for if (par_) schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
            const auto m = static_cast<std::size_t>(mi);
            const auto x = ens_.aug(k_, m);
            const auto dw = ens_.incr(k_, m);
            for (std::size_t l = 0; l <= q; ++l) {
                basis_.regression_features_into(l, k_, x, features_[l].row(m));
            }
            auto row = design.row(m);
            for (std::size_t j = 0; j < features_[0].cols; ++j) row[j] = features_[0].at(m, j);
            for (std::size_t l = 1; l <= q; ++l) {
                const double w = dw[l - 1] / sqrt_h_;
                for (std::size_t j = 0; j < features_[l].cols; ++j) {
                    row[layout_.offset[l] + j] = features_[l].at(m, j) * w;
                }
            }
        }
        dense_factor_.emplace(design);
    }

    const PathEnsemble& ens_;
    const BasisFamily& basis_;
    std::size_t k_;
    StepLayout layout_;
    bool par_;
    double sqrt_h_;

    std::vector<std::size_t> cell_;
    std::vector<Block> blocks_;
    std::vector<DesignMatrix> features_;
    std::optional<SvdFactor> dense_factor_;
};

struct SweepOutput {
    StepCoefficients coeffs;
    std::vector<double> y_raw; // final alpha_0 . p_0 per path
    std::vector<double> fnorm0; // |p_0| per path
    std::vector<double> gaps; // |theta^i - theta^{i-1}|, i = 1..I
    std::pair<double, double> gram{0.0, 0.0};
};

SweepOutput run_sweep(const PathEnsemble& ens, const BasisFamily& basis, std::size_t k,
    std::span<const double> target_next, const DriverFn& driver, int picard_iters,
    double rank_tol, ExecMode mode, bool collect_gram) {
    if (k >= ens.n_steps) throw std::invalid_argument("picard_sweep: step index out of range");
    if (target_next.size() != ens.n_paths) {
        throw std::invalid_argument("picard_sweep: target vector length mismatch");
    }
    if (picard_iters < 1) throw std::invalid_argument("picard_sweep: need at least one iteration");
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
        throw std::invalid_argument("picard_sweep: rank_tol must lie in (0, 1)");
    }

    const std::size_t m_count = ens.n_paths;
    const std::size_t q = basis.n_brownian();
    const double h = ens.step_h;
    const double t = h * static_cast<double>(k);
    const bool par = mode == ExecMode::Parallel;

    StepDesign design(ens, basis, k, mode);

    std::vector<double> y(m_count, 0.0), z(m_count * q, 0.0), b(m_count);
    std::vector<double> theta(design.n_theta(), 0.0), theta_prev;
    SweepOutput out;

    for (int i = 1; i <= picard_iters; ++i) {
#pragma omp parallel for if (par) schedule(static)
        for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
            const auto m = static_cast<std::size_t>(mi);
            b[m] = target_next[m]
                + h * driver(t, ens.state(k, m), y[m], {z.data() + m * q, q});
        }
        theta_prev = theta;
        theta = design.solve(b, rank_tol);

        double g2 = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double d = theta[j] - theta_prev[j];
            g2 += d * d;
        }
        out.gaps.push_back(std::sqrt(g2));

        design.eval_paths(theta, y, z);
    }

    const double sqrt_h = std::sqrt(h);
    out.coeffs.alpha.resize(q + 1);
    StepLayout lay = make_layout(basis, k);
    for (std::size_t l = 0; l <= q; ++l) {
        const std::size_t n_l = basis.size(l, k);
        out.coeffs.alpha[l].assign(theta.begin() + static_cast<std::ptrdiff_t>(lay.offset[l]),
            theta.begin() + static_cast<std::ptrdiff_t>(lay.offset[l] + n_l));
        if (l > 0) {
            for (double& v : out.coeffs.alpha[l]) v /= sqrt_h;
        }
    }
    out.y_raw = std::move(y);
    out.fnorm0.resize(m_count);
    design.feature_norm0(out.fnorm0);
    if (collect_gram) out.gram = design.gram_extremes();
    return out;
}

} // namespace

double smooth_truncate(double x, double rho) {
    if (!(rho >= 1.0)) throw std::invalid_argument("smooth_truncate: radius must be >= 1");
    if (std::isinf(rho)) return x;
    return rho * xi(x / rho);
}

double truncation_radius(const TruncationProfile& profile, const BasisFamily& basis,
    std::size_t l, std::size_t k, std::span<const double> x) {
    if (profile.policy == TruncationPolicy::None) {
        return std::numeric_limits<double>::infinity();
    }
    const auto p = basis.evaluate(l, k, x);
    return std::max(1.0, profile.c0 * norm2(p));
}

std::vector<double> regression_row(const PathEnsemble& ensemble, const BasisFamily& basis,
    std::size_t k, std::size_t m) {
    if (k >= ensemble.n_steps || m >= ensemble.n_paths) {
        throw std::out_of_range("regression_row: index out of range");
    }
    const StepLayout lay = make_layout(basis, k);
    const std::size_t q = basis.n_brownian();
    const double sqrt_h = std::sqrt(ensemble.step_h);
    const auto x = ensemble.aug(k, m);
    const auto dw = ensemble.incr(k, m);

    std::vector<double> row(lay.n_theta, 0.0);
    basis.regression_features_into(0, k, x, {row.data(), basis.size(0, k)});
    for (std::size_t l = 1; l <= q; ++l) {
        std::span<double> seg{row.data() + lay.offset[l], basis.size(l, k)};
        basis.regression_features_into(l, k, x, seg);
        const double w = dw[l - 1] / sqrt_h;
        for (double& v : seg) v *= w;
    }
    return row;
}

StepCoefficients picard_sweep(const PathEnsemble& ensemble, const BasisFamily& basis,
    std::size_t k, std::span<const double> target_next, const DriverFn& driver,
    int picard_iters, double rank_tol, ExecMode mode) {
    return run_sweep(ensemble, basis, k, target_next, driver, picard_iters, rank_tol, mode,
        false)
        .coeffs;
}

BackwardResult backward_solve(const SolverConfig& config, const PathEnsemble& ensemble,
    const BasisFamily& basis, const DriverFn& driver, const PayoffFn& payoff) {
    if (config.n_steps != ensemble.n_steps || config.n_paths != ensemble.n_paths) {
        throw std::invalid_argument("backward_solve: config does not match the ensemble");
    }
    if (basis.n_steps() != ensemble.n_steps || basis.n_brownian() != ensemble.dim_q
        || basis.state_dim() != ensemble.aug_dim) {
        throw std::invalid_argument("backward_solve: basis does not match the ensemble");
    }
    if (config.picard_iters < 1) {
        throw std::invalid_argument("backward_solve: need at least one Picard iteration");
    }

    const std::size_t m_count = ensemble.n_paths;
    const std::size_t big_n = ensemble.n_steps;
    const bool par = config.mode == ExecMode::Parallel;

    std::vector<double> y_next(m_count);
#pragma omp parallel for if (par) schedule(static)
    for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
        const auto m = static_cast<std::size_t>(mi);
        y_next[m] = payoff(ensemble.aug(big_n, m));
    }
    for (std::size_t m = 0; m < m_count; ++m) {
        if (!std::isfinite(y_next[m])) {
            throw std::invalid_argument("backward_solve: payoff produced a non-finite value");
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
            throw std::invalid_argument("backward_solve: fixed truncation needs C_0 > 0");
        }
        profile.c0 = config.trunc_c0;
    }
    const bool no_trunc = config.trunc_policy == TruncationPolicy::None;

    BackwardResult result;
    result.truncation = profile;
    result.coefficients.steps.resize(big_n);
    result.diagnostics.picard_gaps.resize(big_n);
    if (config.collect_gram) result.diagnostics.gram_extremes.resize(big_n);

    for (std::size_t k = big_n; k-- > 0;) {
        auto step = run_sweep(ensemble, basis, k, y_next, driver, config.picard_iters,
            config.rank_tol, config.mode, config.collect_gram);
        result.diagnostics.picard_gaps[k] = std::move(step.gaps);
        if (config.collect_gram) result.diagnostics.gram_extremes[k] = step.gram;
        result.coefficients.steps[k] = std::move(step.coeffs);

        if (k > 0) {
#pragma omp parallel for if (par) schedule(static)
            for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(m_count); ++mi) {
                const auto m = static_cast<std::size_t>(mi);
                if (no_trunc) {
                    y_next[m] = step.y_raw[m];
                } else {
                    const double rho = std::max(1.0, profile.c0 * step.fnorm0[m]);
                    y_next[m] = smooth_truncate(step.y_raw[m], rho);
                }
            }
        }
    }

    auto [y0, z0] = evaluate_yz(result.coefficients, profile, basis, 0, ensemble.aug(0, 0),
        ensemble.step_h);
    result.y0 = y0;
    result.z0 = std::move(z0);
    return result;
}

std::pair<double, std::vector<double>> evaluate_yz(const CoefficientSet& coefficients,
    const TruncationProfile& profile, const BasisFamily& basis, std::size_t k,
    std::span<const double> x, double step_h) {
    if (k >= coefficients.steps.size()) {
        throw std::out_of_range("evaluate_yz: step index out of range");
    }
    const auto& step = coefficients.steps[k];
    const std::size_t q = basis.n_brownian();
    const double sqrt_h = std::sqrt(step_h);
    const bool no_trunc = profile.policy == TruncationPolicy::None;

    std::vector<double> feat(basis.size(0, k));
    basis.regression_features_into(0, k, x, feat);
    const double y_raw = dot(step.alpha[0], feat);
    const double rho0 =
        no_trunc ? std::numeric_limits<double>::infinity() : std::max(1.0, profile.c0 * norm2(feat));
    const double y = smooth_truncate(y_raw, rho0);

    std::vector<double> z(q);
    for (std::size_t l = 1; l <= q; ++l) {
        feat.resize(basis.size(l, k));
        basis.regression_features_into(l, k, x, feat);
        const double raw = sqrt_h * dot(step.alpha[l], feat);
        const double rho = no_trunc ? std::numeric_limits<double>::infinity()
                                    : std::max(1.0, profile.c0 * norm2(feat));
        z[l - 1] = smooth_truncate(raw, rho) / sqrt_h;
    }
    return {y, z};
}

} // namespace bsde
