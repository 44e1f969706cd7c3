#pragma once

// Discrete conical Laplacian, the T family, and metric-coefficient handling.
//
// Every operator is produced row by row as a short list of (node, weight)
// pairs; apply_* sums the row against a field and assemble_* collects the same
// rows into a sparse matrix, so the two realizations cannot drift apart.
//
// Node classes for the stencils:
//   apex of factor j        Delta_j by the pole closure 4/r_1^2 mean(u_1 - u_0); N_j values are 0
//   ring 1                  finite-volume Delta_j (couples to the apex); N^r_j one-sided on rings 1,2,3
//   rings 2..N-1            finite-volume Delta_j; central N^r_j
//   ring N (outer)          one-sided u_rr (4 rings) and u_r (3 rings)
//   tangential end nodes    one-sided 3-point first and 4-point second derivatives

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <vector>

#include "conelab/errors.hpp"
#include "conelab/geometry.hpp"
#include "conelab/grid.hpp"
#include "conelab/toperator.hpp"

namespace conelab {

using Row = std::vector<std::pair<long, double>>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Finite-difference weights (Fornberg): w[k][i] is the weight of node x[i]
/// in the k-th derivative at z.
inline std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& x, int m) {
    const int n = static_cast<int>(x.size()) - 1;
    std::vector<std::vector<double>> c(m + 1, std::vector<double>(n + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

inline void check_grid_angles(const Grid& grid, const ConeAngles& angles) {
    require(grid.p() == angles.p(), "operator: grid and angles disagree on p");
    for (int j = 0; j < grid.p(); ++j)
        require(grid.factor(j).beta == angles.beta(j), "operator: grid and angles disagree on beta");
    require(grid.ambient_tangential() == angles.tangential_dims(), "operator: grid and angles disagree on n");
}

namespace stencil {

inline void add(Row& out, long idx, double w) {
    if (w != 0.0) out.emplace_back(idx, w);
}

// d/dr along factor j with no metric scaling.
inline void radial_first(const Grid& g, long idx, int j, double scale, Row& out) {
    const auto& f = g.factor(j);
    const int l = g.local(idx, j);
    const int i = f.ring(l);
    if (i == 0) return;
    const int m = f.angle_index(l);
    const int n = f.radial_intervals;
    const int lo = i == 1 ? 1 : (i == n ? n - 2 : i - 1);
    const std::vector<double> xs{f.r[lo], f.r[lo + 1], f.r[lo + 2]};
    const auto w = fd_weights(f.r[i], xs, 1);
    for (int q = 0; q < 3; ++q) add(out, g.with_local(idx, j, f.local(lo + q, m)), scale * w[1][q]);
}

inline void radial_second(const Grid& g, long idx, int j, double scale, Row& out) {
    const auto& f = g.factor(j);
    const int l = g.local(idx, j);
    const int i = f.ring(l);
    if (i == 0) return;
    const int m = f.angle_index(l);
    const int n = f.radial_intervals;
    std::vector<int> rings;
    if (i == 1)
        rings = {1, 2, 3, 4};
    else if (i == n)
        rings = {n - 3, n - 2, n - 1, n};
    else
        rings = {i - 1, i, i + 1};
    rings.erase(std::remove_if(rings.begin(), rings.end(), [&](int q) { return q < 1 || q > n; }), rings.end());
    std::vector<double> xs;
    for (int q : rings) xs.push_back(f.r[q]);
    const auto w = fd_weights(f.r[i], xs, 2);
    for (std::size_t q = 0; q < rings.size(); ++q) add(out, g.with_local(idx, j, f.local(rings[q], m)), scale * w[2][q]);
}

// d/dtheta along factor j with no metric scaling.
inline void angular_first(const Grid& g, long idx, int j, double scale, Row& out) {
    const auto& f = g.factor(j);
    const int l = g.local(idx, j);
    const int i = f.ring(l);
    if (i == 0) return;
    const int m = f.angle_index(l);
    const double c = scale / (2.0 * f.dtheta());
    add(out, g.with_local(idx, j, f.local(i, m + 1)), c);
    add(out, g.with_local(idx, j, f.local(i, m - 1)), -c);
}

inline void angular_second(const Grid& g, long idx, int j, double scale, Row& out) {
    const auto& f = g.factor(j);
    const int l = g.local(idx, j);
    const int i = f.ring(l);
    if (i == 0) return;
    const int m = f.angle_index(l);
    const double c = scale / (f.dtheta() * f.dtheta());
    add(out, g.with_local(idx, j, f.local(i, m + 1)), c);
    add(out, g.with_local(idx, j, f.local(i, m - 1)), c);
    add(out, idx, -2.0 * c);
}

inline long tangential_neighbor(const Grid& g, long idx, int a, int q) {
    const auto& t = g.tangential(a);
    if (t.periodic) q = ((q % t.nodes) + t.nodes) % t.nodes;
    return g.with_local(idx, g.p() + a, q);
}

inline void tangential_first(const Grid& g, long idx, int a, double scale, Row& out) {
    const auto& t = g.tangential(a);
    const int q = g.local(idx, g.p() + a);
    const double h = t.h();
    if (t.periodic || (q > 0 && q < t.nodes - 1)) {
        add(out, tangential_neighbor(g, idx, a, q + 1), scale / (2 * h));
        add(out, tangential_neighbor(g, idx, a, q - 1), -scale / (2 * h));
        return;
    }
    const int dir = q == 0 ? 1 : -1;
    const double c = dir * scale / (2 * h);
    add(out, idx, -3.0 * c);
    add(out, tangential_neighbor(g, idx, a, q + dir), 4.0 * c);
    add(out, tangential_neighbor(g, idx, a, q + 2 * dir), -c);
}

inline void tangential_second(const Grid& g, long idx, int a, double scale, Row& out) {
    const auto& t = g.tangential(a);
    const int q = g.local(idx, g.p() + a);
    const double c = scale / (t.h() * t.h());
    if (t.periodic || (q > 0 && q < t.nodes - 1)) {
        add(out, tangential_neighbor(g, idx, a, q + 1), c);
        add(out, tangential_neighbor(g, idx, a, q - 1), c);
        add(out, idx, -2.0 * c);
        return;
    }
    const int dir = q == 0 ? 1 : -1;
    add(out, idx, 2.0 * c);
    add(out, tangential_neighbor(g, idx, a, q + dir), -5.0 * c);
    add(out, tangential_neighbor(g, idx, a, q + 2 * dir), 4.0 * c);
    add(out, tangential_neighbor(g, idx, a, q + 3 * dir), -c);
}

/// N_j (scaled so that the angular direction is unit length) or D'.
inline void first(const Grid& g, long idx, const FirstOrder& op, double scale, Row& out) {
    if (op.kind == FirstOrder::Kind::Tangential) {
        tangential_first(g, idx, op.index, scale, out);
        return;
    }
    const int j = op.index;
    if (op.dir == NDir::Radial) {
        radial_first(g, idx, j, scale, out);
        return;
    }
    const auto& f = g.factor(j);
    const int i = g.ring(idx, j);
    if (i == 0) return;
    angular_first(g, idx, j, scale / (f.beta * f.r[i]), out);
}

/// Per-factor Laplacian u_rr + u_r / r + u_thth / (beta r)^2.
inline void factor_laplacian(const Grid& g, long idx, int j, double scale, Row& out) {
    const auto& f = g.factor(j);
    const int l = g.local(idx, j);
    const int i = f.ring(l);
    const int n = f.radial_intervals;
    const double dth = f.dtheta();
    if (i == 0) {
        const double c = scale * 4.0 / (f.r[1] * f.r[1] * f.angular_nodes);
        for (int m = 0; m < f.angular_nodes; ++m) add(out, g.with_local(idx, j, f.local(1, m)), c);
        add(out, idx, -c * f.angular_nodes);
        return;
    }
    const int m = f.angle_index(l);
    const double b2 = f.beta * f.beta;
    if (i == n) {
        radial_second(g, idx, j, scale, out);
        radial_first(g, idx, j, scale / f.r[i], out);
        angular_second(g, idx, j, scale / (b2 * f.r[i] * f.r[i]), out);
        return;
    }
    const double rp = f.half_radius(i, +1), rm = f.half_radius(i, -1);
    const double area2 = rp * rp - rm * rm; // twice the cell area over beta dtheta
    const double cp = 2.0 * rp / ((f.r[i + 1] - f.r[i]) * area2);
    const double cm = 2.0 * rm / ((f.r[i] - f.r[i - 1]) * area2);
    const double ca = 2.0 / (b2 * f.r[i] * dth * dth * (rp + rm));
    add(out, g.with_local(idx, j, f.local(i + 1, m)), scale * cp);
    add(out, g.with_local(idx, j, f.local(i - 1, m)), scale * cm);
    add(out, g.with_local(idx, j, f.local(i, m + 1)), scale * ca);
    add(out, g.with_local(idx, j, f.local(i, m - 1)), scale * ca);
    add(out, idx, -scale * (cp + cm + 2.0 * ca));
}

/// Composition X_a X_b of first-order operators on distinct coordinate axes.
inline void mixed(const Grid& g, long idx, const FirstOrder& a, const FirstOrder& b, double scale, Row& out) {
    Row inner;
    first(g, idx, a, scale, inner);
    for (const auto& [node, w] : inner) first(g, node, b, w, out);
}

inline void t_operator(const Grid& g, long idx, const TOperator& t, double scale, Row& out) {
    switch (t.kind) {
    case TOperator::Kind::Laplacian: factor_laplacian(g, idx, t.first.index, scale, out); return;
    case TOperator::Kind::Tangential:
        if (t.first.index == t.second.index) {
            tangential_second(g, idx, t.first.index, scale, out);
            return;
        }
        [[fallthrough]];
    default:
        // N_j vanishes on its own stratum, so the mixed operators are 0 at an apex node.
        for (const FirstOrder* f : {&t.first, &t.second})
            if (f->kind == FirstOrder::Kind::Cone && g.is_apex(idx, f->index)) return;
        mixed(g, idx, t.first, t.second, scale, out);
    }
}

inline void laplacian(const Grid& g, long idx, double scale, Row& out) {
    for (int j = 0; j < g.p(); ++j) factor_laplacian(g, idx, j, scale, out);
    for (int a = 0; a < g.tangential_axes(); ++a) tangential_second(g, idx, a, scale, out);
}

inline double dot(const Row& row, const std::vector<double>& u) {
    double s = 0.0;
    for (const auto& [idx, w] : row) s += w * u[idx];
    return s;
}

} // namespace stencil

/// Frame ordering for metric coefficients: (X^r_1, X^th_1, ..., X^r_p, X^th_p, d_s1, ...),
/// with X^th_j = (beta_j r_j)^{-1} d_theta_j; the flat cone metric is the identity.
inline int metric_frame_dim(const Grid& g) { return 2 * g.p() + g.tangential_axes(); }

inline FirstOrder frame_direction(const Grid& g, int a) {
    if (a < 2 * g.p()) return FirstOrder::cone(a / 2, a % 2 == 0 ? NDir::Radial : NDir::Angular);
    return FirstOrder::tangential(a - 2 * g.p());
}

/// A (possibly time-dependent) Hermitian metric given by its matrix in the
/// orthonormal frame of g_beta. Cross terms between a cone factor and anything
/// else must vanish on that factor's stratum; they are projected there.
class MetricField {
public:
    using Generator = std::function<Eigen::MatrixXd(const ConePoint&, double)>;
    static constexpr double kCrossTolerance = 1e-10;

    MetricField() = default;
    explicit MetricField(Generator gen) : gen_(std::move(gen)) {}

    static MetricField flat() { return MetricField(); }
    [[nodiscard]] bool is_flat() const { return !gen_; }

    struct Sample {
        std::vector<Eigen::MatrixXd> inverse; // per node, the h = g^{-1} coefficients
        double equivalence = 1.0;              // C with eigenvalues in [1/C, C]
        double max_cross_near_strata = 0.0;    // largest cross term on nodes nearest a stratum
    };

    /// Validates and inverts the metric on every node of the grid at time t.
    [[nodiscard]] Sample evaluate(const Grid& g, double t = 0.0) const {
        const int d = metric_frame_dim(g);
        Sample out;
        out.inverse.resize(g.size());
        for (std::size_t n = 0; n < g.size(); ++n) {
            const long idx = static_cast<long>(n);
            Eigen::MatrixXd G = gen_ ? gen_(g.point(idx), t) : Eigen::MatrixXd::Identity(d, d);
            require(G.rows() == d && G.cols() == d, "MetricField: coefficient matrix has the wrong size");
            require((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + G.cwiseAbs().maxCoeff()),
                    "MetricField: coefficient matrix is not symmetric");
            check_hermitian(g, G);
            for (int j = 0; j < g.p(); ++j) {
                const int ring = g.ring(idx, j);
                if (ring > 1) continue;
                for (int c = 0; c < d; ++c) {
                    if (c / 2 == j && c < 2 * g.p()) continue;
                    for (int k : {2 * j, 2 * j + 1}) {
                        const double v = std::abs(G(k, c));
                        if (ring == 1) out.max_cross_near_strata = std::max(out.max_cross_near_strata, v);
                        if (ring == 0 || v < kCrossTolerance) G(k, c) = G(c, k) = 0.0;
                    }
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
            const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
            if (!(lo > 0.0)) throw UsageError("MetricField: metric is not positive definite");
            out.equivalence = std::max({out.equivalence, hi, 1.0 / lo});
            out.inverse[n] = G.inverse();
        }
        return out;
    }

private:
    static void check_hermitian(const Grid& g, const Eigen::MatrixXd& G) {
        // J rotates each (X^r_j, X^th_j) pair and each complete tangential (Re, Im) pair.
        const int d = static_cast<int>(G.rows());
        const int paired = 2 * g.p() + 2 * (g.tangential_axes() / 2);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
        for (int k = 0; k < paired; k += 2) {
            J(k + 1, k) = 1.0;
            J(k, k + 1) = -1.0;
        }
        for (int k = paired; k < d; ++k) J(k, k) = 1.0;
        const double err = (J.transpose() * G * J - G).cwiseAbs().maxCoeff();
        require(err <= 1e-10 * (1.0 + G.cwiseAbs().maxCoeff()), "MetricField: coefficients are not Hermitian");
    }

    Generator gen_;
};

namespace stencil {

/// Row of trace(h Hess u) for inverse-metric coefficients h in the orthonormal frame.
inline void metric_laplacian(const Grid& g, long idx, const Eigen::MatrixXd& h, Row& out) {
    const int p = g.p();
    for (int j = 0; j < p; ++j) factor_laplacian(g, idx, j, 0.5 * (h(2 * j, 2 * j) + h(2 * j + 1, 2 * j + 1)), out);
    const int d = static_cast<int>(h.rows());
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            if (a < 2 * p && b == a + 1 && a % 2 == 0) continue; // within one factor: h is a multiple of I
            if (h(a, b) == 0.0) continue;
            const FirstOrder fa = frame_direction(g, a), fb = frame_direction(g, b);
            if ((fa.kind == FirstOrder::Kind::Cone && g.is_apex(idx, fa.index)) ||
                (fb.kind == FirstOrder::Kind::Cone && g.is_apex(idx, fb.index)))
                continue;
            mixed(g, idx, fa, fb, 2.0 * h(a, b), out);
        }
    for (int a = 0; a < g.tangential_axes(); ++a) tangential_second(g, idx, a, h(2 * p + a, 2 * p + a), out);
}

} // namespace stencil

/// Delta_beta u at every node (boundary nodes use the one-sided stencils).
inline GridFunction apply_laplacian_raw(const GridFunction& u) {
    const Grid& g = u.grid();
    GridFunction out(u.grid_ptr());
    Row row;
    for (std::size_t n = 0; n < g.size(); ++n) {
        row.clear();
        stencil::laplacian(g, static_cast<long>(n), 1.0, row);
        out[n] = stencil::dot(row, u.values());
    }
    return out;
}

inline GridFunction apply_conical_laplacian(const GridFunction& u, const ConeAngles& angles) {
    check_grid_angles(u.grid(), angles);
    return apply_laplacian_raw(u);
}

inline void validate_t(const Grid& g, const TOperator& t) {
    auto check = [&](const FirstOrder& f) {
        if (f.kind == FirstOrder::Kind::Cone)
            require(f.index >= 0 && f.index < g.p(), "apply_T: cone index out of range");
        else
            require(f.index >= 0 && f.index < g.tangential_axes(), "apply_T: tangential index not on the grid");
    };
    check(t.first);
    check(t.second);
    if (t.kind == TOperator::Kind::ConeCone) require(t.first.index != t.second.index, "apply_T: N_j N_k requires j != k");
}

inline GridFunction apply_T_raw(const GridFunction& u, const TOperator& t) {
    const Grid& g = u.grid();
    validate_t(g, t);
    GridFunction out(u.grid_ptr());
    Row row;
    for (std::size_t n = 0; n < g.size(); ++n) {
        row.clear();
        stencil::t_operator(g, static_cast<long>(n), t, 1.0, row);
        out[n] = stencil::dot(row, u.values());
    }
    return out;
}

inline GridFunction apply_T(const GridFunction& u, const TOperator& t, const ConeAngles& angles) {
    check_grid_angles(u.grid(), angles);
    t.validate(angles, u.grid().tangential_axes());
    return apply_T_raw(u, t);
}

inline GridFunction apply_first(const GridFunction& u, const FirstOrder& op) {
    const Grid& g = u.grid();
    if (op.kind == FirstOrder::Kind::Cone)
        require(op.index >= 0 && op.index < g.p(), "apply_first: cone index out of range");
    else
        require(op.index >= 0 && op.index < g.tangential_axes(), "apply_first: tangential index not on the grid");
    GridFunction out(u.grid_ptr());
    Row row;
    for (std::size_t n = 0; n < g.size(); ++n) {
        row.clear();
        stencil::first(g, static_cast<long>(n), op, 1.0, row);
        out[n] = stencil::dot(row, u.values());
    }
    return out;
}

/// |grad u|^2_{g_beta} per node. At an apex the factor contribution is 2 mean_m ((u_1m - u_0)/r_1)^2.
inline GridFunction gradient_norm_sq(const GridFunction& u) {
    const Grid& g = u.grid();
    GridFunction out(u.grid_ptr());
    std::vector<GridFunction> parts;
    for (int j = 0; j < g.p(); ++j)
        for (NDir d : {NDir::Radial, NDir::Angular}) parts.push_back(apply_first(u, FirstOrder::cone(j, d)));
    for (int a = 0; a < g.tangential_axes(); ++a) parts.push_back(apply_first(u, FirstOrder::tangential(a)));
    for (std::size_t n = 0; n < g.size(); ++n) {
        double s = 0.0;
        for (const auto& part : parts) s += part[n] * part[n];
        const long idx = static_cast<long>(n);
        for (int j = 0; j < g.p(); ++j) {
            if (!g.is_apex(idx, j)) continue;
            const auto& f = g.factor(j);
            double acc = 0.0;
            for (int m = 0; m < f.angular_nodes; ++m) {
                const double d = (u[g.with_local(idx, j, f.local(1, m))] - u[n]) / f.r[1];
                acc += d * d;
            }
            s += 2.0 * acc / f.angular_nodes;
        }
        out[n] = s;
    }
    return out;
}

/// Frobenius norm squared of the real Hessian in the orthonormal frame.
inline GridFunction hessian_norm_sq(const GridFunction& u) {
    const Grid& g = u.grid();
    const int d = metric_frame_dim(g);
    GridFunction out(u.grid_ptr());
    Row row;
    auto eval = [&](auto&& build) {
        row.clear();
        build();
        return stencil::dot(row, u.values());
    };
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        double s = 0.0;
        for (int j = 0; j < g.p(); ++j) {
            const auto& f = g.factor(j);
            const int i = g.ring(idx, j);
            if (i == 0) {
                const double lap = eval([&] { stencil::factor_laplacian(g, idx, j, 1.0, row); });
                s += 0.5 * lap * lap;
                continue;
            }
            const double r = f.r[i], b = f.beta;
            const double urr = eval([&] { stencil::radial_second(g, idx, j, 1.0, row); });
            const double ur = eval([&] { stencil::radial_first(g, idx, j, 1.0, row); });
            const double ut = eval([&] { stencil::angular_first(g, idx, j, 1.0, row); });
            const double utt = eval([&] { stencil::angular_second(g, idx, j, 1.0, row); });
            const double urt = eval([&] {
                Row inner;
                stencil::angular_first(g, idx, j, 1.0, inner);
                for (const auto& [node, w] : inner) stencil::radial_first(g, node, j, w, row);
            });
            const double htt = utt / (b * b * r * r) + ur / r;
            const double hrt = urt / (b * r) - ut / (b * r * r);
            s += urr * urr + htt * htt + 2.0 * hrt * hrt;
        }
        for (int a = 0; a < d; ++a)
            for (int c = a; c < d; ++c) {
                const FirstOrder fa = frame_direction(g, a), fc = frame_direction(g, c);
                const bool same_factor = a < 2 * g.p() && c < 2 * g.p() && a / 2 == c / 2;
                if (same_factor) continue;
                double v;
                if (a == c)
                    v = eval([&] { stencil::tangential_second(g, idx, fa.index, 1.0, row); });
                else
                    v = eval([&] {
                        if ((fa.kind == FirstOrder::Kind::Cone && g.is_apex(idx, fa.index)) ||
                            (fc.kind == FirstOrder::Kind::Cone && g.is_apex(idx, fc.index)))
                            return;
                        stencil::mixed(g, idx, fa, fc, 1.0, row);
                    });
                s += (a == c ? 1.0 : 2.0) * v * v;
            }
        out[n] = s;
    }
    return out;
}

/// Dirichlet mask: nodes whose values are prescribed. Defaults to the grid boundary.
inline std::vector<char> boundary_mask(const Grid& g) {
    std::vector<char> mask(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) mask[n] = g.is_boundary(static_cast<long>(n)) ? 1 : 0;
    return mask;
}

/// Interior rows of Delta_beta (flat) or trace(h Hess) (metric); identity rows on masked nodes.
inline SparseMatrix assemble_operator(const Grid& g, const MetricField& metric, double t,
                                      const std::vector<char>& dirichlet) {
    require(dirichlet.size() == g.size(), "assemble: mask size mismatch");
    std::optional<MetricField::Sample> sample;
    if (!metric.is_flat()) sample = metric.evaluate(g, t);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.size() * (5 + 2 * g.p() + 2 * g.tangential_axes()));
    Row row;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        if (dirichlet[n]) {
            trips.emplace_back(idx, idx, 1.0);
            continue;
        }
        row.clear();
        if (sample)
            stencil::metric_laplacian(g, idx, sample->inverse[n], row);
        else
            stencil::laplacian(g, idx, 1.0, row);
        for (const auto& [c, w] : row) trips.emplace_back(idx, c, w);
    }
    SparseMatrix A(static_cast<long>(g.size()), static_cast<long>(g.size()));
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

/// Largest row defect diag - sum|off| over interior rows (negative means strictly diagonally dominant is violated).
inline double diagonal_dominance_margin(const SparseMatrix& A, const std::vector<char>& dirichlet) {
    double worst = std::numeric_limits<double>::infinity();
    for (long r = 0; r < A.outerSize(); ++r) {
        if (dirichlet[r]) continue;
        double diag = 0.0, off = 0.0;
        for (SparseMatrix::InnerIterator it(A, r); it; ++it) (it.col() == r ? diag : off) += std::abs(it.value());
        worst = std::min(worst, (diag - off) / diag);
    }
    return worst;
}

inline SparseMatrix assemble_laplacian_matrix(const Grid& g, const MetricField& metric, const ConeAngles& angles,
                                              double t = 0.0) {
    check_grid_angles(g, angles);
    const auto mask = boundary_mask(g);
    SparseMatrix A = assemble_operator(g, metric, t, mask);
    if (metric.is_flat() && diagonal_dominance_margin(A, mask) < -1e-12)
        throw SolverError("assemble_laplacian_matrix: flat interior rows lost diagonal dominance", {});
    return A;
}

/// Quadrature weights (control volumes) for every node.
inline std::vector<double> node_volumes(const Grid& g) {
    std::vector<double> v(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) v[n] = g.volume(static_cast<long>(n));
    return v;
}

} // namespace conelab
