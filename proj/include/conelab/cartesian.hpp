#pragma once

// The eps-regularized path: uniform Cartesian grids in the holomorphic
// coordinates z_j = x_j + i y_j over the polydisk {|z_j| < R^{1/beta_j}} times
// the tangential box, and the smooth operator
//   sum_j c_j (|z_j|^2 + eps)^{1-beta_j} Delta_{x_j y_j} + sum_k d^2/ds_k^2.
// c_j = 1/4 is the literal complex-coordinate convention; c_j = 1/beta_j^2 is the
// conical convention, under which eps -> 0 recovers the artifact's Delta_beta.

#include <Eigen/Sparse>

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "conelab/errors.hpp"
#include "conelab/geometry.hpp"
#include "conelab/grid.hpp"
#include "conelab/linear_solve.hpp"

namespace conelab {

enum class Convention { Complex, Conical };

inline double convention_factor(Convention c, double beta) { return c == Convention::Complex ? 0.25 : 1.0 / (beta * beta); }

class CartesianGrid {
public:
    CartesianGrid(const ConeAngles& angles, int nodes_per_side, double radius, std::vector<TangentialAxis> tangential)
        : angles_(angles), nodes_(nodes_per_side), radius_(radius), tangential_(std::move(tangential)) {
        require(nodes_per_side >= 5 && nodes_per_side % 2 == 1, "CartesianGrid: nodes per side must be odd and >= 5");
        require(radius > 0.0, "CartesianGrid: radius must be positive");
        require(static_cast<int>(tangential_.size()) <= angles.tangential_dims(), "CartesianGrid: too many tangential axes");
        for (int j = 0; j < angles.p(); ++j) {
            const double zr = std::pow(radius, 1.0 / angles.beta(j));
            zradius_.push_back(zr);
            h_.push_back(2.0 * zr / (nodes_per_side - 1));
        }
        sizes_.clear();
        for (int j = 0; j < angles.p(); ++j) {
            sizes_.push_back(nodes_);
            sizes_.push_back(nodes_);
        }
        for (const auto& t : tangential_) sizes_.push_back(t.nodes);
        strides_.assign(sizes_.size(), 1);
        for (int a = static_cast<int>(sizes_.size()) - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * sizes_[a + 1];
        size_ = strides_[0] * sizes_[0];
    }

    [[nodiscard]] const ConeAngles& angles() const { return angles_; }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(size_); }
    [[nodiscard]] int nodes_per_side() const { return nodes_; }
    [[nodiscard]] double h(int j) const { return h_[j]; }
    [[nodiscard]] double z_radius(int j) const { return zradius_[j]; }
    [[nodiscard]] int axis_count() const { return static_cast<int>(sizes_.size()); }
    [[nodiscard]] int tangential_axes() const { return static_cast<int>(tangential_.size()); }
    [[nodiscard]] const TangentialAxis& tangential(int a) const { return tangential_[a]; }
    [[nodiscard]] long stride(int axis) const { return strides_[axis]; }
    [[nodiscard]] int local(long idx, int axis) const { return static_cast<int>((idx / strides_[axis]) % sizes_[axis]); }

    /// Coordinate along a real axis (2j, 2j+1 are x_j, y_j; then tangential).
    [[nodiscard]] double coord(int axis, int q) const {
        if (axis < 2 * angles_.p()) return -zradius_[axis / 2] + q * h_[axis / 2];
        return tangential_[axis - 2 * angles_.p()].coord(q);
    }

    [[nodiscard]] std::vector<std::complex<double>> z(long idx) const {
        std::vector<std::complex<double>> out(angles_.n(), {0.0, 0.0});
        for (int j = 0; j < angles_.p(); ++j) out[j] = {coord(2 * j, local(idx, 2 * j)), coord(2 * j + 1, local(idx, 2 * j + 1))};
        for (int a = 0; a < tangential_axes(); ++a) {
            const double s = coord(2 * angles_.p() + a, local(idx, 2 * angles_.p() + a));
            auto& slot = out[angles_.p() + a / 2];
            slot = a % 2 == 0 ? std::complex<double>(s, slot.imag()) : std::complex<double>(slot.real(), s);
        }
        return out;
    }

    [[nodiscard]] ConePoint point(long idx) const {
        const auto zz = z(idx);
        return to_weighted_polar(zz, angles_);
    }

    /// True when every |z_j| is inside its disk and every Dirichlet tangential index is interior.
    [[nodiscard]] bool inside(long idx) const {
        for (int j = 0; j < angles_.p(); ++j) {
            const double x = coord(2 * j, local(idx, 2 * j)), y = coord(2 * j + 1, local(idx, 2 * j + 1));
            if (x * x + y * y >= zradius_[j] * zradius_[j] * (1.0 - 1e-12)) return false;
        }
        for (int a = 0; a < tangential_axes(); ++a)
            if (tangential_[a].is_end(local(idx, 2 * angles_.p() + a))) return false;
        return true;
    }

private:
    ConeAngles angles_;
    int nodes_;
    double radius_;
    std::vector<TangentialAxis> tangential_;
    std::vector<double> zradius_, h_;
    std::vector<int> sizes_;
    std::vector<long> strides_;
    long size_ = 0;
};

struct CartesianField {
    std::shared_ptr<const CartesianGrid> grid;
    std::vector<double> values;
};

inline double regularized_coefficient(double x, double y, double eps, double beta, Convention c) {
    return convention_factor(c, beta) * std::pow(x * x + y * y + eps, 1.0 - beta);
}

/// Discrete Delta_{g_eps} with plain 5-point stencils; values on nodes without a full stencil are 0.
inline std::vector<double> apply_regularized_laplacian(const CartesianField& u, double eps, const ConeAngles& angles,
                                                       Convention convention = Convention::Complex) {
    require(eps > 0.0, "apply_regularized_laplacian: eps must be positive");
    const CartesianGrid& g = *u.grid;
    require(g.angles() == angles, "apply_regularized_laplacian: grid built for other angles");
    std::vector<double> out(g.size(), 0.0);
    const int p = angles.p();
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        bool full = true;
        for (int a = 0; a < g.axis_count() && full; ++a) {
            const int q = g.local(idx, a);
            const bool periodic = a >= 2 * p && g.tangential(a - 2 * p).periodic;
            if (!periodic && (q == 0 || q == (a < 2 * p ? g.nodes_per_side() : g.tangential(a - 2 * p).nodes) - 1)) full = false;
        }
        if (!full) continue;
        double acc = 0.0;
        for (int j = 0; j < p; ++j) {
            const double x = g.coord(2 * j, g.local(idx, 2 * j)), y = g.coord(2 * j + 1, g.local(idx, 2 * j + 1));
            const double c = regularized_coefficient(x, y, eps, angles.beta(j), convention) / (g.h(j) * g.h(j));
            for (int a : {2 * j, 2 * j + 1})
                acc += c * (u.values[idx + g.stride(a)] + u.values[idx - g.stride(a)] - 2.0 * u.values[idx]);
        }
        for (int k = 0; k < g.tangential_axes(); ++k) {
            const auto& t = g.tangential(k);
            const int axis = 2 * p + k;
            const int q = g.local(idx, axis);
            auto nb = [&](int d) {
                int qq = q + d;
                if (t.periodic) qq = (qq % t.nodes + t.nodes) % t.nodes;
                return u.values[idx + static_cast<long>(qq - q) * g.stride(axis)];
            };
            acc += (nb(1) + nb(-1) - 2.0 * u.values[idx]) / (t.h() * t.h());
        }
        out[n] = acc;
    }
    return out;
}

struct CartesianSolve {
    CartesianField solution;
    double eps = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

/// Dirichlet problem for Delta_{g_eps} u = f on the polydisk; disk boundaries use
/// Shortley-Weller cut cells with phi evaluated at the exact crossing points.
inline CartesianSolve solve_regularized(std::shared_ptr<const CartesianGrid> grid, double eps,
                                        const std::function<double(const ConePoint&)>& f,
                                        const std::function<double(const ConePoint&)>& phi, Convention convention,
                                        const std::vector<double>* guess, const LinearSolveOptions& opt) {
    require(eps > 0.0, "solve_regularized: eps must be positive");
    const CartesianGrid& g = *grid;
    const auto& angles = g.angles();
    const int p = angles.p();
    std::vector<char> dirichlet(g.size());
    std::vector<double> u(g.size(), 0.0);
    for (std::size_t n = 0; n < g.size(); ++n) {
        dirichlet[n] = g.inside(static_cast<long>(n)) ? 0 : 1;
        if (dirichlet[n]) u[n] = phi(g.point(static_cast<long>(n)));
    }
    Partition part(dirichlet);
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(part.size());
    for (long k = 0; k < part.size(); ++k) {
        const long idx = part.unknowns[k];
        const auto zz = g.z(idx);
        double b = f(g.point(idx));
        double diag = 0.0;
        for (int j = 0; j < p; ++j) {
            const double c = regularized_coefficient(zz[j].real(), zz[j].imag(), eps, angles.beta(j), convention);
            const double h = g.h(j), zr = g.z_radius(j);
            for (int a : {2 * j, 2 * j + 1}) {
                double arm[2];
                double bval[2];
                long nb[2];
                for (int side = 0; side < 2; ++side) {
                    const int dir = side == 0 ? -1 : 1;
                    nb[side] = idx + dir * g.stride(a);
                    arm[side] = h;
                    if (!dirichlet[nb[side]] || g.inside(nb[side])) continue;
                    // Distance along the axis to the circle |z_j| = zr.
                    const double along = a % 2 == 0 ? zz[j].real() : zz[j].imag();
                    const double other = a % 2 == 0 ? zz[j].imag() : zz[j].real();
                    const double reach = std::sqrt(std::max(0.0, zr * zr - other * other));
                    const double eta = std::clamp(dir > 0 ? reach - along : along + reach, 1e-3 * h, h);
                    arm[side] = eta;
                    auto zc = zz;
                    zc[j] = a % 2 == 0 ? std::complex<double>(along + dir * eta, other) : std::complex<double>(other, along + dir * eta);
                    bval[side] = phi(to_weighted_polar(zc, angles));
                    nb[side] = -1;
                }
                const double hl = arm[0], hr = arm[1];
                const double wl = c * 2.0 / (hl * (hl + hr)), wr = c * 2.0 / (hr * (hl + hr));
                diag -= wl + wr;
                for (int side = 0; side < 2; ++side) {
                    const double w = side == 0 ? wl : wr;
                    if (nb[side] < 0)
                        b -= w * bval[side];
                    else if (dirichlet[nb[side]])
                        b -= w * u[nb[side]];
                    else
                        trips.emplace_back(k, part.position[nb[side]], w);
                }
            }
        }
        for (int t = 0; t < g.tangential_axes(); ++t) {
            const auto& ax = g.tangential(t);
            const int axis = 2 * p + t;
            const int q = g.local(idx, axis);
            const double w = 1.0 / (ax.h() * ax.h());
            diag -= 2.0 * w;
            for (int d : {-1, 1}) {
                int qq = q + d;
                if (ax.periodic) qq = (qq % ax.nodes + ax.nodes) % ax.nodes;
                const long nbi = idx + static_cast<long>(qq - q) * g.stride(axis);
                if (dirichlet[nbi])
                    b -= w * u[nbi];
                else
                    trips.emplace_back(k, part.position[nbi], w);
            }
        }
        trips.emplace_back(k, k, diag);
        rhs[k] = b;
    }
    SparseMatrix A(part.size(), part.size());
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    Eigen::VectorXd x0 = guess ? part.gather(*guess) : Eigen::VectorXd::Zero(part.size());
    // Negate so the diagonal is positive for the diagonal preconditioner.
    SparseMatrix negA = -A;
    auto res = solve_general(negA, -rhs, x0, opt);
    part.scatter(res.x, u);
    return {{grid, std::move(u)}, eps, res.iterations, res.relative_residual};
}

} // namespace conelab
