#pragma once

// Tensor-product grids in cone-polar plus tangential coordinates.
//
// Each conical factor carries a single apex node (local index 0) and rings
// i = 1..N of M angular nodes (local index 1 + (i-1)*M + m). Radial nodes are
// graded as r_i = R (i/N)^gamma. Tangential axes are uniform, either Dirichlet
// (end nodes are boundary) or periodic.

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "conelab/errors.hpp"
#include "conelab/geometry.hpp"

namespace conelab {

struct FactorAxis {
    double beta = 1.0; // metric angle parameter; 1 gives an ordinary flat polar patch
    int radial_intervals = 0;
    int angular_nodes = 0;
    double radius = 1.0;
    double grading = 1.0;
    std::vector<double> r; // r[0] = 0 is the apex

    static FactorAxis graded(double beta, int radial_intervals, int angular_nodes, double radius, double grading = 0.0) {
        require(beta > 0.0 && beta <= 1.0, "FactorAxis: beta must lie in (0,1]");
        require(radial_intervals >= 3, "FactorAxis: need at least 3 radial intervals");
        require(angular_nodes >= 8 && angular_nodes % 2 == 0, "FactorAxis: angular node count must be even and >= 8");
        require(radius > 0.0, "FactorAxis: radius must be positive");
        FactorAxis f;
        f.beta = beta;
        f.radial_intervals = radial_intervals;
        f.angular_nodes = angular_nodes;
        f.radius = radius;
        f.grading = grading > 0.0 ? grading : std::max(1.0, 1.0 / beta);
        f.r.resize(radial_intervals + 1);
        for (int i = 0; i <= radial_intervals; ++i)
            f.r[i] = radius * std::pow(static_cast<double>(i) / radial_intervals, f.grading);
        f.r.back() = radius;
        return f;
    }

    [[nodiscard]] int local_size() const { return 1 + radial_intervals * angular_nodes; }
    [[nodiscard]] double dtheta() const { return kTwoPi / angular_nodes; }
    [[nodiscard]] int ring(int local) const { return local == 0 ? 0 : 1 + (local - 1) / angular_nodes; }
    [[nodiscard]] int angle_index(int local) const { return local == 0 ? 0 : (local - 1) % angular_nodes; }
    [[nodiscard]] int local(int ring_index, int m) const {
        if (ring_index == 0) return 0;
        m %= angular_nodes;
        if (m < 0) m += angular_nodes;
        return 1 + (ring_index - 1) * angular_nodes + m;
    }
    [[nodiscard]] double theta(int m) const { return m * dtheta(); }
    [[nodiscard]] double half_radius(int i, int side) const {
        // r_{i+1/2} for side = +1, r_{i-1/2} for side = -1
        return 0.5 * (r[i] + r[i + side]);
    }

    /// Metric area of the control cell of a local node (apex disk, annular sector, or outer half cell).
    [[nodiscard]] double volume(int local_index) const {
        const int i = ring(local_index);
        if (i == 0) {
            const double rho = 0.5 * r[1];
            return std::numbers::pi * beta * rho * rho;
        }
        const double outer = i == radial_intervals ? r[i] : half_radius(i, +1);
        const double inner = half_radius(i, -1);
        return 0.5 * beta * dtheta() * (outer * outer - inner * inner);
    }
};

struct TangentialAxis {
    int nodes = 0;
    double lo = -1.0, hi = 1.0;
    bool periodic = false;

    static TangentialAxis uniform(int nodes, double lo, double hi, bool periodic) {
        require(nodes >= (periodic ? 4 : 5), "TangentialAxis: too few nodes");
        require(hi > lo, "TangentialAxis: empty interval");
        return {nodes, lo, hi, periodic};
    }
    [[nodiscard]] double h() const { return periodic ? (hi - lo) / nodes : (hi - lo) / (nodes - 1); }
    [[nodiscard]] double coord(int q) const { return lo + q * h(); }
    [[nodiscard]] bool is_end(int q) const { return !periodic && (q == 0 || q == nodes - 1); }
    [[nodiscard]] double weight(int q) const { return is_end(q) ? 0.5 * h() : h(); }
};

class Grid {
public:
    Grid(std::vector<FactorAxis> factors, std::vector<TangentialAxis> tangential, int ambient_tangential)
        : factors_(std::move(factors)), tangential_(std::move(tangential)), ambient_tangential_(ambient_tangential) {
        require(!factors_.empty(), "Grid: at least one conical factor");
        require(ambient_tangential_ >= static_cast<int>(tangential_.size()), "Grid: more tangential axes than ambient dims");
        sizes_.clear();
        for (const auto& f : factors_) sizes_.push_back(f.local_size());
        for (const auto& t : tangential_) sizes_.push_back(t.nodes);
        strides_.assign(sizes_.size(), 1);
        for (int a = static_cast<int>(sizes_.size()) - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * sizes_[a + 1];
        size_ = strides_[0] * sizes_[0];
    }

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(size_); }
    [[nodiscard]] int p() const { return static_cast<int>(factors_.size()); }
    [[nodiscard]] int tangential_axes() const { return static_cast<int>(tangential_.size()); }
    [[nodiscard]] int ambient_tangential() const { return ambient_tangential_; }
    [[nodiscard]] int axis_count() const { return static_cast<int>(sizes_.size()); }
    [[nodiscard]] const FactorAxis& factor(int j) const { return factors_[j]; }
    [[nodiscard]] const TangentialAxis& tangential(int a) const { return tangential_[a]; }
    [[nodiscard]] const std::vector<FactorAxis>& factors() const { return factors_; }
    [[nodiscard]] const std::vector<TangentialAxis>& tangentials() const { return tangential_; }
    [[nodiscard]] long stride(int axis) const { return strides_[axis]; }
    [[nodiscard]] long tangential_stride(int a) const { return strides_[p() + a]; }

    /// Local index along an axis (factor local index, or tangential node index).
    [[nodiscard]] int local(long idx, int axis) const { return static_cast<int>((idx / strides_[axis]) % sizes_[axis]); }
    [[nodiscard]] long with_local(long idx, int axis, int value) const {
        return idx + (static_cast<long>(value) - local(idx, axis)) * strides_[axis];
    }

    [[nodiscard]] int ring(long idx, int j) const { return factors_[j].ring(local(idx, j)); }
    [[nodiscard]] bool is_apex(long idx, int j) const { return local(idx, j) == 0; }

    [[nodiscard]] bool is_boundary(long idx) const {
        for (int j = 0; j < p(); ++j)
            if (ring(idx, j) == factors_[j].radial_intervals) return true;
        for (int a = 0; a < tangential_axes(); ++a)
            if (tangential_[a].is_end(local(idx, p() + a))) return true;
        return false;
    }

    [[nodiscard]] ConePoint point(long idx) const {
        std::vector<PolarCoord> polar(p());
        for (int j = 0; j < p(); ++j) {
            const int l = local(idx, j);
            const auto& f = factors_[j];
            polar[j] = {f.r[f.ring(l)], f.theta(f.angle_index(l))};
        }
        std::vector<double> tan(ambient_tangential_, 0.0);
        for (int a = 0; a < tangential_axes(); ++a) tan[a] = tangential_[a].coord(local(idx, p() + a));
        return ConePoint(std::move(polar), std::move(tan));
    }

    /// Quadrature weight: product of the per-axis control volumes.
    [[nodiscard]] double volume(long idx) const {
        double v = 1.0;
        for (int j = 0; j < p(); ++j) v *= factors_[j].volume(local(idx, j));
        for (int a = 0; a < tangential_axes(); ++a) v *= tangential_[a].weight(local(idx, p() + a));
        return v;
    }

    /// Multilinear interpolation weights at x: (node index, weight) pairs.
    [[nodiscard]] std::vector<std::pair<long, double>> interpolation_stencil(const ConePoint& x) const {
        std::vector<std::pair<long, double>> acc{{0L, 1.0}};
        auto extend = [&](int axis, const std::vector<std::pair<int, double>>& local_weights) {
            std::vector<std::pair<long, double>> next;
            for (const auto& [idx, w] : acc)
                for (const auto& [l, lw] : local_weights)
                    if (lw != 0.0) next.emplace_back(idx + static_cast<long>(l) * strides_[axis], w * lw);
            acc.swap(next);
        };
        for (int j = 0; j < p(); ++j) extend(j, factor_weights(factors_[j], x.r(j), x.theta(j)));
        for (int a = 0; a < tangential_axes(); ++a) extend(p() + a, tangential_weights(tangential_[a], x.s(a)));
        return acc;
    }

private:
    static std::vector<std::pair<int, double>> factor_weights(const FactorAxis& f, double r, double theta) {
        require(r <= f.radius * (1.0 + 1e-12), "interpolate: point outside the grid radius");
        r = std::min(r, f.radius);
        const double pos = normalize_angle(theta) / f.dtheta();
        const int m0 = static_cast<int>(std::floor(pos));
        const double wt = pos - m0;
        const auto it = std::upper_bound(f.r.begin(), f.r.end(), r);
        int i = static_cast<int>(it - f.r.begin()) - 1;
        i = std::clamp(i, 0, f.radial_intervals - 1);
        const double wr = (r - f.r[i]) / (f.r[i + 1] - f.r[i]);
        std::vector<std::pair<int, double>> out;
        if (i == 0) {
            out.emplace_back(0, 1.0 - wr);
        } else {
            out.emplace_back(f.local(i, m0), (1.0 - wr) * (1.0 - wt));
            out.emplace_back(f.local(i, m0 + 1), (1.0 - wr) * wt);
        }
        out.emplace_back(f.local(i + 1, m0), wr * (1.0 - wt));
        out.emplace_back(f.local(i + 1, m0 + 1), wr * wt);
        return out;
    }

    static std::vector<std::pair<int, double>> tangential_weights(const TangentialAxis& t, double s) {
        double pos = (s - t.lo) / t.h();
        if (t.periodic) {
            pos = std::fmod(pos, static_cast<double>(t.nodes));
            if (pos < 0) pos += t.nodes;
            const int q = static_cast<int>(std::floor(pos));
            const double w = pos - q;
            return {{q % t.nodes, 1.0 - w}, {(q + 1) % t.nodes, w}};
        }
        require(pos >= -1e-9 && pos <= t.nodes - 1 + 1e-9, "interpolate: tangential coordinate outside the grid");
        pos = std::clamp(pos, 0.0, static_cast<double>(t.nodes - 1));
        const int q = std::min(static_cast<int>(std::floor(pos)), t.nodes - 2);
        const double w = pos - q;
        return {{q, 1.0 - w}, {q + 1, w}};
    }

    std::vector<FactorAxis> factors_;
    std::vector<TangentialAxis> tangential_;
    int ambient_tangential_;
    std::vector<int> sizes_;
    std::vector<long> strides_;
    long size_ = 0;
};

/// User-facing grid description; defaults are the "default grid" of the test suites.
struct GridSpec {
    int radial_intervals = 24;
    int angular_nodes = 16;
    double radius = 1.0;
    double grading = 0.0; // 0 selects max(1, 1/beta) per factor
    int tangential_axes = -1; // -1: every ambient tangential coordinate
    int tangential_nodes = 25;
    double half_width = 1.0;
    bool periodic = false;
};

inline std::shared_ptr<const Grid> make_grid(const ConeAngles& angles, const GridSpec& spec) {
    std::vector<FactorAxis> factors;
    for (int j = 0; j < angles.p(); ++j)
        factors.push_back(FactorAxis::graded(angles.beta(j), spec.radial_intervals, spec.angular_nodes, spec.radius, spec.grading));
    const int axes = spec.tangential_axes < 0 ? angles.tangential_dims() : spec.tangential_axes;
    require(axes <= angles.tangential_dims(), "make_grid: more tangential axes than 2(n-p)");
    std::vector<TangentialAxis> tan;
    for (int a = 0; a < axes; ++a) {
        if (spec.periodic)
            tan.push_back(TangentialAxis::uniform(spec.tangential_nodes, 0.0, 2.0 * spec.half_width, true));
        else
            tan.push_back(TangentialAxis::uniform(spec.tangential_nodes, -spec.half_width, spec.half_width, false));
    }
    return std::make_shared<const Grid>(std::move(factors), std::move(tan), angles.tangential_dims());
}

class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(std::shared_ptr<const Grid> grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_->size(), fill) {}
    GridFunction(std::shared_ptr<const Grid> grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        require(values_.size() == grid_->size(), "GridFunction: value count does not match grid size");
    }

    template <class F>
    static GridFunction sample(std::shared_ptr<const Grid> grid, F&& f) {
        GridFunction out(grid);
        for (std::size_t i = 0; i < grid->size(); ++i) out.values_[i] = f(grid->point(static_cast<long>(i)));
        return out;
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] std::vector<double>& values() { return values_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    [[nodiscard]] double interpolate(const ConePoint& x) const {
        double v = 0.0;
        for (const auto& [idx, w] : grid_->interpolation_stencil(x)) v += w * values_[idx];
        return v;
    }

    [[nodiscard]] double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    GridFunction& operator+=(const GridFunction& o) {
        for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridFunction& operator*=(double k) {
        for (double& v : values_) v *= k;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a.values_[i] -= b.values_[i];
        return a;
    }
    friend GridFunction operator*(double k, GridFunction a) { return a *= k; }
    friend GridFunction operator*(GridFunction a, double k) { return a *= k; }

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
};

/// One GridFunction per time level.
struct SpaceTimeField {
    std::shared_ptr<const Grid> grid;
    std::vector<double> times;
    std::vector<std::vector<double>> levels;

    [[nodiscard]] std::size_t level_count() const { return times.size(); }
    [[nodiscard]] GridFunction at(std::size_t level) const { return GridFunction(grid, levels.at(level)); }
    [[nodiscard]] GridFunction final_level() const { return at(level_count() - 1); }
    void push(double t, std::vector<double> values) {
        require(values.size() == grid->size(), "SpaceTimeField: level size mismatch");
        times.push_back(t);
        levels.push_back(std::move(values));
    }
};

} // namespace conelab
