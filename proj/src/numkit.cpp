#include "bsde/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bsde {

namespace {

void check_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(what) + " contains a non-finite entry");
        }
    }
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// One-sided Jacobi on a square col-major matrix g (n x n): post-multiplies
// rotations until all column pairs are numerically orthogonal, accumulating
// them into v. Columns of g end up as u_j * sigma_j.
void jacobi_orthogonalize(std::vector<double>& g, std::vector<double>& v, std::size_t n) {
    constexpr double kTol = 4.0 * std::numeric_limits<double>::epsilon();
    constexpr int kMaxSweeps = 60;

    v.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* gp = g.data() + p * n;
                double* gq = g.data() + q * n;
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    app += gp[i] * gp[i];
                    aqq += gq[i] * gq[i];
                    apq += gp[i] * gq[i];
                }
                if (std::abs(apq) <= kTol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0)
                    / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;

                for (std::size_t i = 0; i < n; ++i) {
                    const double gpi = gp[i], gqi = gq[i];
                    gp[i] = c * gpi - s * gqi;
                    gq[i] = s * gpi + c * gqi;
                }
                double* vp = v.data() + p * n;
                double* vq = v.data() + q * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const double vpi = vp[i], vqi = vq[i];
                    vp[i] = c * vpi - s * vqi;
                    vq[i] = s * vpi + c * vqi;
                }
            }
        }
        if (!rotated) break;
    }
}

} // namespace

SvdFactor::SvdFactor(const DesignMatrix& a) {
    if (a.rows == 0 || a.cols == 0) {
        throw std::invalid_argument("SvdFactor: empty design matrix");
    }
    check_finite(a.data, "design matrix");
    rows_ = a.rows;
    cols_ = a.cols;
    transposed_ = rows_ < cols_;
    fr_ = transposed_ ? cols_ : rows_;
    fc_ = transposed_ ? rows_ : cols_;

    // Copy (or transpose) into col-major working storage.
    std::vector<double> w(fr_ * fc_);
    if (!transposed_) {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) w[j * fr_ + i] = a.at(i, j);
    } else {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) w[i * fr_ + j] = a.at(i, j);
    }
    factor_tall(w, fr_, fc_);
}

void SvdFactor::factor_tall(std::vector<double>& a, std::size_t r, std::size_t c) {
    // Householder QR, vectors stored below the diagonal of a.
    beta_.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        double* col = a.data() + j * r;
        double xnorm = 0.0;
        for (std::size_t i = j; i < r; ++i) xnorm += col[i] * col[i];
        xnorm = std::sqrt(xnorm);
        if (xnorm == 0.0) {
            beta_[j] = 0.0;
            continue;
        }
        const double alpha = col[j] >= 0.0 ? -xnorm : xnorm;
        const double v0 = col[j] - alpha;
        col[j] = alpha;
        // v = (v0, col[j+1..r-1]); normalize so v[0] = 1
        for (std::size_t i = j + 1; i < r; ++i) col[i] /= v0;
        beta_[j] = -v0 / alpha; // = 2 / |v|^2 with v[0] = 1 scaling

        for (std::size_t jj = j + 1; jj < c; ++jj) {
            double* cj = a.data() + jj * r;
            double dot = cj[j];
            for (std::size_t i = j + 1; i < r; ++i) dot += col[i] * cj[i];
            const double f = beta_[j] * dot;
            cj[j] -= f;
            for (std::size_t i = j + 1; i < r; ++i) cj[i] -= f * col[i];
        }
    }

    // Extract R (c x c upper triangle) and run Jacobi on it.
    std::vector<double> g(c * c, 0.0);
    for (std::size_t j = 0; j < c; ++j)
        for (std::size_t i = 0; i <= j; ++i) g[j * c + i] = a[j * fr_ + i];
    house_ = std::move(a);

    jacobi_orthogonalize(g, v_, c);

    sigma_.assign(c, 0.0);
    u_.assign(c * c, 0.0);
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norms(c);
    for (std::size_t j = 0; j < c; ++j) norms[j] = norm2({g.data() + j * c, c});
    std::stable_sort(order.begin(), order.end(),
        [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    std::vector<double> vs(c * c);
    for (std::size_t j = 0; j < c; ++j) {
        const std::size_t src = order[j];
        sigma_[j] = norms[src];
        if (sigma_[j] > 0.0) {
            for (std::size_t i = 0; i < c; ++i) u_[j * c + i] = g[src * c + i] / sigma_[j];
        }
        for (std::size_t i = 0; i < c; ++i) vs[j * c + i] = v_[src * c + i];
    }
    v_ = std::move(vs);
}

void SvdFactor::apply_qt(std::span<double> y) const {
    for (std::size_t j = 0; j < fc_; ++j) {
        if (beta_[j] == 0.0) continue;
        const double* col = house_.data() + j * fr_;
        double dot = y[j];
        for (std::size_t i = j + 1; i < fr_; ++i) dot += col[i] * y[i];
        const double f = beta_[j] * dot;
        y[j] -= f;
        for (std::size_t i = j + 1; i < fr_; ++i) y[i] -= f * col[i];
    }
}

void SvdFactor::apply_q(std::span<double> y) const {
    for (std::size_t jj = fc_; jj-- > 0;) {
        if (beta_[jj] == 0.0) continue;
        const double* col = house_.data() + jj * fr_;
        double dot = y[jj];
        for (std::size_t i = jj + 1; i < fr_; ++i) dot += col[i] * y[i];
        const double f = beta_[jj] * dot;
        y[jj] -= f;
        for (std::size_t i = jj + 1; i < fr_; ++i) y[i] -= f * col[i];
    }
}

std::size_t SvdFactor::rank(double rank_tol) const {
    const double cutoff = rank_tol * max_singular_value();
    std::size_t r = 0;
    for (double s : sigma_)
        if (s > cutoff) ++r;
    return r;
}

std::vector<double> SvdFactor::solve_with_cutoff(std::span<const double> b,
    double cutoff) const {
    if (b.size() != rows_) {
        throw std::invalid_argument("solve: right-hand side length mismatch");
    }
    check_finite(b, "right-hand side");

    const std::size_t c = fc_;
    if (!transposed_) {
        // theta = V * diag(1/sigma) * U^T * (Q^T b)[0..c)
        std::vector<double> y(b.begin(), b.end());
        apply_qt(y);
        std::vector<double> w(c, 0.0);
        for (std::size_t j = 0; j < c; ++j) {
            if (sigma_[j] <= cutoff) continue;
            const double* uj = u_.data() + j * c;
            double dot = 0.0;
            for (std::size_t i = 0; i < c; ++i) dot += uj[i] * y[i];
            w[j] = dot / sigma_[j];
        }
        std::vector<double> theta(cols_, 0.0);
        for (std::size_t j = 0; j < c; ++j) {
            if (w[j] == 0.0) continue;
            const double* vj = v_.data() + j * c;
            for (std::size_t i = 0; i < c; ++i) theta[i] += vj[i] * w[j];
        }
        return theta;
    }

    // A = V_R * Sigma * (Q [U_R; 0])^T, so theta = Q [U_R (Sigma^+ V_R^T b); 0].
    std::vector<double> w(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        if (sigma_[j] <= cutoff) continue;
        const double* vj = v_.data() + j * c;
        double dot = 0.0;
        for (std::size_t i = 0; i < c; ++i) dot += vj[i] * b[i];
        w[j] = dot / sigma_[j];
    }
    std::vector<double> theta(fr_, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        if (w[j] == 0.0) continue;
        const double* uj = u_.data() + j * c;
        for (std::size_t i = 0; i < c; ++i) theta[i] += uj[i] * w[j];
    }
    apply_q(theta);
    return theta;
}

std::vector<double> SvdFactor::solve(std::span<const double> b, double rank_tol) const {
    return solve_with_cutoff(b, rank_tol * max_singular_value());
}

LsSolution solve_min_norm(const DesignMatrix& a, std::span<const double> b, double rank_tol) {
    if (a.rows == 0 || a.cols == 0) {
        throw std::invalid_argument("solve_min_norm: empty design matrix");
    }
    if (b.size() != a.rows) {
        throw std::invalid_argument("solve_min_norm: right-hand side length mismatch");
    }
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
        throw std::invalid_argument("solve_min_norm: rank_tol must lie in (0, 1)");
    }

    SvdFactor f(a);
    LsSolution out;
    out.coefficients = f.solve(b, rank_tol);
    out.numerical_rank = f.rank(rank_tol);

    double rss = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double pred = 0.0;
        const double* row = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) pred += row[j] * out.coefficients[j];
        const double r = b[i] - pred;
        rss += r * r;
    }
    out.residual_norm = std::sqrt(rss);
    return out;
}

std::pair<double, double> gram_diagnostic(const DesignMatrix& a) {
    if (a.rows == 0 || a.cols == 0) {
        throw std::invalid_argument("gram_diagnostic: empty design matrix");
    }
    SvdFactor f(a);
    const auto& s = f.singular_values();
    const double inv_m = 1.0 / static_cast<double>(a.rows);
    const double lmax = s.front() * s.front() * inv_m;
    // The Gram matrix has cols eigenvalues; a wide matrix pads with zeros.
    const double lmin = a.rows < a.cols ? 0.0 : s.back() * s.back() * inv_m;
    return {lmin, lmax};
}

} // namespace bsde
