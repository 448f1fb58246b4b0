#include "bsde/bases.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsde {

namespace {

void append_exponents(std::vector<std::vector<unsigned>>& out, std::vector<unsigned>& cur,
    std::size_t pos, unsigned remaining) {
    if (pos + 1 == cur.size()) {
        cur[pos] = remaining;
        out.push_back(cur);
        return;
    }
    for (unsigned e = remaining; e != static_cast<unsigned>(-1); --e) {
        cur[pos] = e;
        append_exponents(out, cur, pos + 1, remaining - e);
    }
}

std::vector<std::vector<unsigned>> monomial_exponents(std::size_t dim, std::size_t degree) {
    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> cur(dim, 0);
    for (unsigned total = 0; total <= degree; ++total) {
        append_exponents(out, cur, 0, total);
    }
    return out;
}

double powi(double x, unsigned e) {
    double r = 1.0;
    for (unsigned i = 0; i < e; ++i) r *= x;
    return r;
}

} // namespace

std::size_t monomial_count(std::size_t dim, std::size_t degree) {
    // C(dim + degree, degree)
    std::size_t n = 1;
    for (std::size_t i = 1; i <= degree; ++i) n = n * (dim + i) / i;
    return n;
}

void BasisFamily::check_indices(std::size_t l, std::size_t k) const {
    if (l > n_brownian_) throw std::out_of_range("basis: component index out of range");
    if (k >= n_steps_) throw std::out_of_range("basis: time index out of range");
}

std::size_t BasisFamily::n_cells(std::size_t k) const {
    switch (kind_) {
        case BasisKind::HC:
            return total_cells_;
        case BasisKind::VP:
        case BasisKind::VP10:
            return voronoi_.centers_per_time[k].size() / dim_;
        case BasisKind::GP:
            throw std::logic_error("basis: global polynomials have no cells");
    }
    return 0;
}

std::size_t BasisFamily::block_size(std::size_t l) const {
    return kind_ == BasisKind::VP10 && l == 0 ? 1 + dim_ : 1;
}

void BasisFamily::block_values(std::size_t l, std::span<const double> x,
    std::span<double> out) const {
    out[0] = 1.0;
    if (kind_ == BasisKind::VP10 && l == 0) {
        for (std::size_t j = 0; j < dim_; ++j) out[1 + j] = x[j];
    }
}

std::size_t BasisFamily::size(std::size_t l, std::size_t k) const {
    check_indices(l, k);
    switch (kind_) {
        case BasisKind::HC:
            return total_cells_;
        case BasisKind::VP:
            return n_cells(k);
        case BasisKind::VP10:
            return n_cells(k) * block_size(l);
        case BasisKind::GP:
            return l == 0 ? exps_y_.size() : exps_z_.size();
    }
    return 0;
}

std::size_t BasisFamily::cell_index(std::size_t k, std::span<const double> x) const {
    if (kind_ == BasisKind::HC) {
        std::size_t idx = 0;
        std::size_t stride = 1;
        for (std::size_t j = 0; j < dim_; ++j) {
            // Half-open cells (a, b]: the lower face is excluded, so a point
            // sitting exactly on an interior boundary joins the lower cell.
            const double u = (x[j] - lo_[j]) / cell_edge_;
            const double c = std::ceil(u);
            if (!(c >= 1.0) || c > static_cast<double>(cells_per_axis_)) return npos;
            idx += (static_cast<std::size_t>(c) - 1) * stride;
            stride *= cells_per_axis_;
        }
        return idx;
    }
    const auto& centers = voronoi_.centers_per_time[k];
    const std::size_t count = centers.size() / dim_;
    std::size_t best = 0;
    double best_d2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double diff = x[j] - centers[i * dim_ + j];
            d2 += diff * diff;
        }
        if (i == 0 || d2 < best_d2) { // strict <: ties go to the lowest index
            best = i;
            best_d2 = d2;
        }
    }
    return best;
}

std::size_t BasisFamily::nearest_cell(std::size_t k, std::span<const double> x) const {
    if (kind_ != BasisKind::HC) return cell_index(k, x);
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t j = 0; j < dim_; ++j) {
        const double u = (x[j] - lo_[j]) / cell_edge_;
        double c = std::ceil(u);
        if (!(c >= 1.0)) c = 1.0;
        if (c > static_cast<double>(cells_per_axis_)) c = static_cast<double>(cells_per_axis_);
        idx += (static_cast<std::size_t>(c) - 1) * stride;
        stride *= cells_per_axis_;
    }
    return idx;
}

void BasisFamily::regression_features_into(std::size_t l, std::size_t k,
    std::span<const double> x, std::span<double> out) const {
    if (kind_ == BasisKind::GP) {
        evaluate_into(l, k, x, out);
        return;
    }
    check_indices(l, k);
    if (out.size() != size(l, k)) throw std::invalid_argument("basis: output has wrong length");
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t cell = nearest_cell(k, x);
    const std::size_t bs = block_size(l);
    block_values(l, x, {out.data() + cell * bs, bs});
}

void BasisFamily::evaluate_into(std::size_t l, std::size_t k, std::span<const double> x,
    std::span<double> out) const {
    check_indices(l, k);
    if (x.size() != dim_) throw std::invalid_argument("basis: point has wrong dimension");
    if (out.size() != size(l, k)) throw std::invalid_argument("basis: output has wrong length");

    if (kind_ == BasisKind::GP) {
        const auto& exps = l == 0 ? exps_y_ : exps_z_;
        for (std::size_t i = 0; i < exps.size(); ++i) {
            double v = 1.0;
            for (std::size_t j = 0; j < dim_; ++j) v *= powi(x[j], exps[i][j]);
            out[i] = v;
        }
        return;
    }

    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t cell = cell_index(k, x);
    if (cell == npos) return; // outside the partition: zero features
    const std::size_t bs = block_size(l);
    block_values(l, x, {out.data() + cell * bs, bs});
}

std::vector<double> BasisFamily::evaluate(std::size_t l, std::size_t k,
    std::span<const double> x) const {
    std::vector<double> out(size(l, k), 0.0);
    evaluate_into(l, k, x, out);
    return out;
}

BasisFamily build_hc(const HypercubeSpec& spec, std::size_t n_steps, std::size_t n_brownian) {
    if (spec.center.empty()) throw std::invalid_argument("hypercubes: empty center");
    if (!(spec.half_width > 0.0)) throw std::invalid_argument("hypercubes: half width must be > 0");
    if (!(spec.edge > 0.0)) throw std::invalid_argument("hypercubes: edge must be > 0");
    const double ratio = 2.0 * spec.half_width / spec.edge;
    const double n_axis = std::round(ratio);
    if (n_axis < 1.0 || std::abs(ratio - n_axis) > 1e-3 * n_axis) {
        throw std::invalid_argument("hypercubes: domain width is not a whole number of cells");
    }

    BasisFamily b;
    b.kind_ = BasisKind::HC;
    b.dim_ = spec.center.size();
    b.n_steps_ = n_steps;
    b.n_brownian_ = n_brownian;
    b.cells_per_axis_ = static_cast<std::size_t>(n_axis);
    // The cells tile the domain exactly even when 2R/edge is only close to
    // an integer.
    b.cell_edge_ = 2.0 * spec.half_width / n_axis;
    b.lo_.resize(b.dim_);
    for (std::size_t j = 0; j < b.dim_; ++j) b.lo_[j] = spec.center[j] - spec.half_width;
    b.total_cells_ = 1;
    for (std::size_t j = 0; j < b.dim_; ++j) b.total_cells_ *= b.cells_per_axis_;
    return b;
}

namespace {

void validate_voronoi(const VoronoiSpec& spec, std::size_t n_steps) {
    if (spec.dim == 0) throw std::invalid_argument("voronoi: state dimension must be >= 1");
    if (spec.centers_per_time.size() != n_steps) {
        throw std::invalid_argument("voronoi: need one center list per time step");
    }
    for (const auto& centers : spec.centers_per_time) {
        if (centers.empty() || centers.size() % spec.dim != 0) {
            throw std::invalid_argument("voronoi: malformed center list");
        }
        const std::size_t count = centers.size() / spec.dim;
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = i + 1; j < count; ++j) {
                bool equal = true;
                for (std::size_t c = 0; c < spec.dim; ++c) {
                    if (centers[i * spec.dim + c] != centers[j * spec.dim + c]) {
                        equal = false;
                        break;
                    }
                }
                if (equal) {
                    throw std::invalid_argument("voronoi: duplicate centers at a time step");
                }
            }
        }
    }
}

} // namespace

BasisFamily build_vp(const VoronoiSpec& spec, std::size_t n_steps, std::size_t n_brownian) {
    validate_voronoi(spec, n_steps);
    BasisFamily b;
    b.kind_ = BasisKind::VP;
    b.dim_ = spec.dim;
    b.n_steps_ = n_steps;
    b.n_brownian_ = n_brownian;
    b.voronoi_ = spec;
    return b;
}

BasisFamily build_vp10(const VoronoiSpec& spec, std::size_t n_steps, std::size_t n_brownian) {
    validate_voronoi(spec, n_steps);
    BasisFamily b;
    b.kind_ = BasisKind::VP10;
    b.dim_ = spec.dim;
    b.n_steps_ = n_steps;
    b.n_brownian_ = n_brownian;
    b.voronoi_ = spec;
    return b;
}

BasisFamily build_gp(std::size_t degree_y, std::size_t degree_z, std::size_t state_dim,
    std::size_t n_steps, std::size_t n_brownian) {
    if (state_dim == 0) throw std::invalid_argument("polynomials: state dimension must be >= 1");
    BasisFamily b;
    b.kind_ = BasisKind::GP;
    b.dim_ = state_dim;
    b.n_steps_ = n_steps;
    b.n_brownian_ = n_brownian;
    b.exps_y_ = monomial_exponents(state_dim, degree_y);
    b.exps_z_ = monomial_exponents(state_dim, degree_z);
    return b;
}

} // namespace bsde
