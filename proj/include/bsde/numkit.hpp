#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace bsde {

// Dense row-major design matrix: one row per sample, one column per feature.
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows * cols, row-major

    DesignMatrix() = default;
    DesignMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct LsSolution {
    std::vector<double> coefficients; // length cols
    std::size_t numerical_rank = 0;
    double residual_norm = 0.0; // Euclidean norm of b - A*theta
};

// Reusable rank-revealing factorization of a design matrix (Householder QR
// followed by a one-sided Jacobi SVD of the triangular factor). Factor once,
// then solve for any number of right-hand sides; each solve returns the
// minimal-norm least-squares solution with singular values at or below the
// cutoff treated as zero.
class SvdFactor {
public:
    explicit SvdFactor(const DesignMatrix& a);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    // All min(rows, cols) singular values, descending.
    const std::vector<double>& singular_values() const { return sigma_; }
    double max_singular_value() const { return sigma_.empty() ? 0.0 : sigma_.front(); }

    std::size_t rank(double rank_tol) const;

    // Minimal-norm solution; directions with sigma <= cutoff are dropped.
    std::vector<double> solve_with_cutoff(std::span<const double> b, double cutoff) const;
    std::vector<double> solve(std::span<const double> b, double rank_tol) const;

private:
    void factor_tall(std::vector<double>& a_colmajor, std::size_t r, std::size_t c);
    void apply_qt(std::span<double> y) const;
    void apply_q(std::span<double> y) const;

    std::size_t rows_ = 0, cols_ = 0;
    bool transposed_ = false; // factored A^T because rows < cols
    std::size_t fr_ = 0, fc_ = 0; // factored shape, fr_ >= fc_
    std::vector<double> house_; // fr_ x fc_ col-major, Householder vectors below diag
    std::vector<double> beta_; // fc_ Householder scalars
    std::vector<double> u_; // fc_ x fc_ col-major, left factor of R
    std::vector<double> v_; // fc_ x fc_ col-major, right factor of R
    std::vector<double> sigma_; // fc_, descending
};

// Minimal-norm least squares: among all minimizers of |b - A*theta|, return
// the one of smallest Euclidean norm. numerical_rank counts singular values
// above rank_tol times the largest one.
LsSolution solve_min_norm(const DesignMatrix& a, std::span<const double> b,
    double rank_tol = 1e-10);

// Smallest and largest eigenvalues of the empirical Gram matrix (1/M) A^T A.
std::pair<double, double> gram_diagnostic(const DesignMatrix& a);

} // namespace bsde
