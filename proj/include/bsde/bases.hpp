#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsde {

enum class BasisKind { HC, VP, VP10, GP };

// Axis-aligned hypercube partition of the box prod_j (center_j - R, center_j + R],
// cut into cells of edge `edge` (2R/edge must be within 0.1% of an integer).
struct HypercubeSpec {
    std::vector<double> center;
    double half_width = 0.0; // R
    double edge = 0.0; // delta
};

// Nearest-center partition, one center list per time step. Lists may have
// different lengths across steps; centers within a step must be distinct.
struct VoronoiSpec {
    std::size_t dim = 0; // d'
    std::vector<std::vector<double>> centers_per_time; // [k]: count_k * dim, row-major
};

// Feature maps p_{l,k} for l = 0..q and k = 0..N-1. HC/VP/GP use the same
// map for every l; VP10 attaches local degree-1 polynomials to l = 0 and
// indicators to l >= 1.
class BasisFamily {
public:
    static constexpr std::size_t npos = ~std::size_t{0};

    BasisKind kind() const { return kind_; }
    std::size_t state_dim() const { return dim_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_brownian() const { return n_brownian_; }

    // n_{l,k}
    std::size_t size(std::size_t l, std::size_t k) const;

    std::vector<double> evaluate(std::size_t l, std::size_t k, std::span<const double> x) const;
    // Same, writing into caller storage of length size(l, k).
    void evaluate_into(std::size_t l, std::size_t k, std::span<const double> x,
        std::span<double> out) const;

    // --- structure used by the regression fast path ---

    // True when every feature map is supported on one cell of a partition.
    bool indicator_structured() const { return kind_ != BasisKind::GP; }
    std::size_t n_cells(std::size_t k) const;
    // Cell holding x, or npos when x falls outside the partition (HC only).
    std::size_t cell_index(std::size_t k, std::span<const double> x) const;
    // Cell for x with the boundary cells extended outward: every state maps
    // somewhere (HC clamps the per-axis index; Voronoi cells already cover
    // the whole space). This is the assignment the regression machinery uses.
    std::size_t nearest_cell(std::size_t k, std::span<const double> x) const;
    // Features as the regression sees them: the active block at
    // nearest_cell(k, x) for the partition kinds, the monomials for GP.
    void regression_features_into(std::size_t l, std::size_t k, std::span<const double> x,
        std::span<double> out) const;
    // Features carried by the active cell: {1} for indicators, (1, x_1..x_d')
    // for the VP10 l = 0 block.
    std::size_t block_size(std::size_t l) const;
    void block_values(std::size_t l, std::span<const double> x, std::span<double> out) const;

    friend BasisFamily build_hc(const HypercubeSpec&, std::size_t, std::size_t);
    friend BasisFamily build_vp(const VoronoiSpec&, std::size_t, std::size_t);
    friend BasisFamily build_vp10(const VoronoiSpec&, std::size_t, std::size_t);
    friend BasisFamily build_gp(std::size_t, std::size_t, std::size_t, std::size_t, std::size_t);

private:
    BasisFamily() = default;
    void check_indices(std::size_t l, std::size_t k) const;

    BasisKind kind_ = BasisKind::HC;
    std::size_t dim_ = 0;
    std::size_t n_steps_ = 0;
    std::size_t n_brownian_ = 0;

    // HC
    std::vector<double> lo_;
    std::size_t cells_per_axis_ = 0;
    double cell_edge_ = 0.0;
    std::size_t total_cells_ = 0;

    // VP / VP10
    VoronoiSpec voronoi_;

    // GP: exponent tables, graded-lexicographic (degree ascending, tuples
    // lexicographically descending within a degree)
    std::vector<std::vector<unsigned>> exps_y_;
    std::vector<std::vector<unsigned>> exps_z_;
};

BasisFamily build_hc(const HypercubeSpec& spec, std::size_t n_steps, std::size_t n_brownian);
BasisFamily build_vp(const VoronoiSpec& spec, std::size_t n_steps, std::size_t n_brownian);
BasisFamily build_vp10(const VoronoiSpec& spec, std::size_t n_steps, std::size_t n_brownian);
BasisFamily build_gp(std::size_t degree_y, std::size_t degree_z, std::size_t state_dim,
    std::size_t n_steps, std::size_t n_brownian);

// Number of monomials in `dim` variables of total degree <= degree.
std::size_t monomial_count(std::size_t dim, std::size_t degree);

} // namespace bsde
