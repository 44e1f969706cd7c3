#include <gtest/gtest.h>

#include <random>

#include "conelab/closed_form.hpp"
#include "conelab/operators.hpp"

using namespace conelab;

namespace {

GridSpec spec(int nr, int m, int tnodes = 9, int axes = -1) {
    GridSpec s;
    s.radial_intervals = nr;
    s.angular_nodes = m;
    s.tangential_nodes = tnodes;
    s.tangential_axes = axes;
    return s;
}

double max_interior_error(const GridFunction& a, const std::function<double(const ConePoint&)>& exact,
                          const std::function<bool(const ConePoint&)>& keep) {
    double e = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        const long idx = static_cast<long>(n);
        if (a.grid().is_boundary(idx)) continue;
        const auto x = a.grid().point(idx);
        if (!keep(x)) continue;
        e = std::max(e, std::abs(a[n] - exact(x)));
    }
    return e;
}

auto everywhere = [](const ConePoint&) { return true; };

} // namespace

TEST(Grid, LayoutAndGrading) {
    ConeAngles a({0.5}, 2);
    auto g = make_grid(a, spec(8, 8, 5));
    EXPECT_EQ(g->size(), static_cast<std::size_t>((1 + 8 * 8) * 5 * 5));
    const auto& f = g->factor(0);
    EXPECT_DOUBLE_EQ(f.grading, 2.0);
    EXPECT_EQ(f.r[0], 0.0);
    for (int i = 1; i <= 8; ++i) EXPECT_GT(f.r[i], f.r[i - 1]);
    EXPECT_THROW(FactorAxis::graded(0.5, 8, 7, 1.0), UsageError);
    EXPECT_THROW(FactorAxis::graded(0.5, 2, 8, 1.0), UsageError);
    // Total metric volume of the polydisk x box: pi beta R^2 * 2 * 2.
    double vol = 0.0;
    for (std::size_t n = 0; n < g->size(); ++n) vol += g->volume(static_cast<long>(n));
    EXPECT_NEAR(vol, std::numbers::pi * 0.5 * 4.0, 1e-12);
}

TEST(Grid, InterpolationReproducesNodesAndLinearTangential) {
    ConeAngles a({0.7}, 2);
    auto g = make_grid(a, spec(10, 12, 7));
    auto u = GridFunction::sample(g, [](const ConePoint& x) { return x.r(0) * x.r(0) + x.s(0) - 2 * x.s(1); });
    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        const long idx = static_cast<long>(rng() % g->size());
        EXPECT_NEAR(u.interpolate(g->point(idx)), u[idx], 1e-13);
    }
    const auto x = ConePoint({{0.0, 0.0}}, {0.123, -0.4});
    EXPECT_NEAR(u.interpolate(x), 0.123 + 0.8, 1e-13);
}

TEST(ConicalLaplacian, RadialSquareIsFourEverywhereInside) {
    ConeAngles a({0.6}, 1);
    auto g = make_grid(a, spec(20, 16));
    auto u = GridFunction::sample(g, [](const ConePoint& x) { return x.r(0) * x.r(0); });
    auto lap = apply_conical_laplacian(u, a);
    EXPECT_LT(max_interior_error(lap, [](const ConePoint&) { return 4.0; }, everywhere), 1e-9);
}

TEST(ConicalLaplacian, TangentialSquaresGiveFour) {
    ConeAngles a({0.6}, 2);
    auto g = make_grid(a, spec(8, 8, 9));
    auto u = GridFunction::sample(g, [](const ConePoint& x) { return x.s(0) * x.s(0) + x.s(1) * x.s(1); });
    auto lap = apply_conical_laplacian(u, a);
    for (std::size_t n = 0; n < lap.size(); ++n) EXPECT_NEAR(lap[n], 4.0, 1e-10);
}

TEST(ConicalLaplacian, HolomorphicRealPartIsHarmonicToOrder) {
    ConeAngles a({0.75}, 1);
    auto form = fields::re_z_power(0, 2, a);
    std::vector<double> errs;
    for (int nr : {16, 32, 64}) {
        auto g = make_grid(a, spec(nr, nr));
        auto u = GridFunction::sample(g, [&](const ConePoint& x) { return form(x); });
        auto lap = apply_conical_laplacian(u, a);
        errs.push_back(max_interior_error(lap, [](const ConePoint&) { return 0.0; },
                                          [](const ConePoint& x) { return x.r(0) > 0.3; }));
    }
    EXPECT_LT(errs[2], errs[1]);
    EXPECT_LT(errs[1], errs[0]);
    EXPECT_LT(errs[2], 0.05);
}

TEST(ConicalLaplacian, SecondOrderConvergenceAwayFromApex) {
    ConeAngles a({0.75}, 1);
    auto u_exact = [](const ConePoint& x) { return std::pow(x.r(0), 3) * std::cos(x.theta(0)); };
    // Delta (r^3 cos th) = (9 - 1/beta^2) r cos th
    auto lap_exact = [&](const ConePoint& x) { return (9.0 - 1.0 / (0.75 * 0.75)) * x.r(0) * std::cos(x.theta(0)); };
    std::vector<double> errs;
    for (int nr : {16, 32, 64, 128}) {
        auto g = make_grid(a, spec(nr, nr));
        auto lap = apply_conical_laplacian(GridFunction::sample(g, u_exact), a);
        errs.push_back(max_interior_error(lap, lap_exact, [](const ConePoint& x) { return x.r(0) > 0.3; }));
    }
    for (std::size_t k = 1; k < errs.size(); ++k) {
        const double rate = std::log2(errs[k - 1] / errs[k]);
        EXPECT_NEAR(rate, 2.0, 0.3) << "refinement " << k;
    }
}

TEST(ConicalLaplacian, PoleRegularity) {
    ConeAngles a({0.4}, 1);
    double prev = 0.0;
    for (int nr : {12, 24, 48}) {
        auto g = make_grid(a, spec(nr, 16));
        auto u = GridFunction::sample(g, [](const ConePoint& x) {
            return 0.7 + x.r(0) * x.r(0) * (1.0 + 0.5 * std::cos(2 * x.theta(0)) + 0.3 * std::sin(x.theta(0)));
        });
        auto lap = apply_conical_laplacian(u, a);
        double near_apex = 0.0;
        for (std::size_t n = 0; n < lap.size(); ++n)
            if (g->ring(static_cast<long>(n), 0) <= 2) near_apex = std::max(near_apex, std::abs(lap[n]));
        EXPECT_TRUE(std::isfinite(near_apex));
        if (prev > 0.0) EXPECT_LT(near_apex, 2.0 * prev + 1.0);
        prev = near_apex;
    }
}

TEST(ConicalLaplacian, RejectsMismatchedAngles) {
    ConeAngles a({0.6}, 1);
    auto g = make_grid(a, spec(8, 8));
    GridFunction u(g);
    EXPECT_THROW(apply_conical_laplacian(u, ConeAngles({0.5}, 1)), UsageError);
}

TEST(Operators, Linearity) {
    ConeAngles a({0.6, 0.8}, 3);
    auto g = make_grid(a, spec(6, 8, 5));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    GridFunction u(g), v(g);
    for (std::size_t n = 0; n < g->size(); ++n) {
        u[n] = nd(rng);
        v[n] = nd(rng);
    }
    const double ka = 1.7, kb = -0.3;
    auto check = [&](auto&& op) {
        auto lhs = op(ka * u + kb * v);
        auto rhs = ka * op(u) + kb * op(v);
        const double scale = 1.0 + rhs.sup_norm();
        for (std::size_t n = 0; n < lhs.size(); ++n) EXPECT_NEAR(lhs[n], rhs[n], 1e-12 * scale);
    };
    check([&](const GridFunction& w) { return apply_conical_laplacian(w, a); });
    for (const auto& t : all_t_operators(a, g->tangential_axes()))
        check([&](const GridFunction& w) { return apply_T(w, t, a); });
}

TEST(ApplyT, Examples) {
    ConeAngles a({0.75}, 2);
    auto g = make_grid(a, spec(24, 16, 9));
    auto form = fields::re_z_power(0, 1, a);
    auto u = GridFunction::sample(g, [&](const ConePoint& x) { return form(x); });
    auto mixed = apply_T(u, TOperator::cone_tangential(0, NDir::Radial, 1), a);
    EXPECT_LT(mixed.sup_norm(), 1e-10);
    auto nr = apply_first(u, FirstOrder::cone(0, NDir::Radial));
    // Away from the apex the one-sided/central stencils approximate (1/beta) r^{1/beta-1} cos th.
    double err = 0.0;
    for (std::size_t n = 0; n < nr.size(); ++n) {
        const auto x = g->point(static_cast<long>(n));
        if (x.r(0) < 0.3) continue;
        err = std::max(err, std::abs(nr[n] - std::pow(x.r(0), 1.0 / 0.75 - 1.0) * std::cos(x.theta(0)) / 0.75));
    }
    EXPECT_LT(err, 5e-3);

    ConeAngles a2({0.6, 0.9}, 2);
    auto g2 = make_grid(a2, spec(6, 8));
    auto prod = GridFunction::sample(g2, [](const ConePoint& x) { return x.r(0) * x.r(1); });
    auto t = apply_T(prod, TOperator::cone_cone(0, NDir::Radial, 1, NDir::Radial), a2);
    for (std::size_t n = 0; n < t.size(); ++n) {
        const long idx = static_cast<long>(n);
        if (g2->is_apex(idx, 0) || g2->is_apex(idx, 1)) continue;
        EXPECT_NEAR(t[n], 1.0, 1e-10);
    }
    EXPECT_THROW(TOperator::cone_cone(0, NDir::Radial, 0, NDir::Radial), UsageError);
    EXPECT_THROW(apply_T(prod, TOperator::cone_tangential(0, NDir::Radial, 0), a2), UsageError);
}

TEST(ApplyT, ConvergesToClosedFormAwayFromStrata) {
    ConeAngles a({0.7, 0.85}, 3);
    auto form = fields::re_z_power(0, 1, a) * fields::re_z_power(1, 1, a) + fields::radial_power(0, 3.0) * fields::tangential_coord(0);
    const auto ops = all_t_operators(a, 1);
    std::vector<std::vector<double>> errs(ops.size());
    for (int nr : {8, 16}) {
        auto g = make_grid(a, spec(nr, nr, nr + 1, 1));
        auto u = GridFunction::sample(g, [&](const ConePoint& x) { return form(x); });
        for (std::size_t k = 0; k < ops.size(); ++k) {
            auto num = apply_T(u, ops[k], a);
            double err = 0.0;
            for (std::size_t n = 0; n < num.size(); ++n) {
                const long idx = static_cast<long>(n);
                const auto x = g->point(idx);
                if (x.r(0) < 0.4 || x.r(1) < 0.4 || g->is_boundary(idx)) continue;
                err = std::max(err, std::abs(num[n] - form.apply(ops[k], x, a)));
            }
            errs[k].push_back(err);
        }
    }
    for (std::size_t k = 0; k < ops.size(); ++k) {
        EXPECT_LT(errs[k][1], 0.1) << ops[k].name();
        if (errs[k][1] > 1e-10) EXPECT_GT(errs[k][0] / errs[k][1], 2.5) << ops[k].name(); // else exact
    }
}

TEST(Assembly, MatVecMatchesApply) {
    ConeAngles a({0.55}, 2);
    auto g = make_grid(a, spec(10, 12, 7));
    auto A = assemble_laplacian_matrix(*g, MetricField::flat(), a);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    GridFunction u(g);
    for (double& v : u.values()) v = nd(rng);
    Eigen::Map<const Eigen::VectorXd> uv(u.values().data(), static_cast<long>(u.size()));
    Eigen::VectorXd Au = A * uv;
    auto lap = apply_conical_laplacian(u, a);
    const double scale = lap.sup_norm();
    for (std::size_t n = 0; n < u.size(); ++n) {
        if (g->is_boundary(static_cast<long>(n)))
            EXPECT_EQ(Au[static_cast<long>(n)], u[n]);
        else
            EXPECT_NEAR(Au[static_cast<long>(n)], lap[n], 1e-12 * scale);
    }
}

TEST(Assembly, IdentityMetricReducesToFlatExactly) {
    ConeAngles a({0.55}, 2);
    auto g = make_grid(a, spec(8, 8, 5));
    const int d = metric_frame_dim(*g);
    MetricField id([d](const ConePoint&, double) { return Eigen::MatrixXd::Identity(d, d); });
    auto A = assemble_laplacian_matrix(*g, MetricField::flat(), a);
    auto B = assemble_laplacian_matrix(*g, id, a);
    EXPECT_EQ((A - B).norm(), 0.0);
}

TEST(Assembly, DiagonalDominanceOnDefaultGrid) {
    ConeAngles a({0.75}, 2);
    auto g = make_grid(a, GridSpec{});
    const auto mask = boundary_mask(*g);
    auto A = assemble_operator(*g, MetricField::flat(), 0.0, mask);
    EXPECT_GE(diagonal_dominance_margin(A, mask), -1e-12);
}

TEST(Assembly, MetricValidation) {
    ConeAngles a({0.6}, 2);
    auto g = make_grid(a, spec(6, 8, 5));
    const int d = metric_frame_dim(*g);
    MetricField neg([d](const ConePoint&, double) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
        m(2, 2) = m(3, 3) = -1.0;
        return m;
    });
    EXPECT_THROW(assemble_laplacian_matrix(*g, neg, a), UsageError);
    MetricField non_hermitian([d](const ConePoint&, double) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
        m(0, 0) = 2.0;
        return m;
    });
    EXPECT_THROW(assemble_laplacian_matrix(*g, non_hermitian, a), UsageError);
}

TEST(Assembly, NonFlatMetricMatchesClosedFormOperator) {
    // g = diag(a, a, 1, 1) plus a J-invariant cone/tangential cross block c r (I).
    ConeAngles a({0.7}, 2);
    auto gen = [](const ConePoint& x, double) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4);
        m(0, 0) = m(1, 1) = 1.0 + 0.3 * x.s(0) * x.s(0);
        const double c = 0.2 * x.r(0);
        m(0, 2) = m(2, 0) = m(1, 3) = m(3, 1) = c;
        return m;
    };
    MetricField metric(gen);
    auto form = fields::radial_power(0, 2.0) * fields::tangential_coord(0) + fields::tangential_square_sum();
    std::vector<double> errs;
    for (int nr : {16, 32}) {
        auto g = make_grid(a, spec(nr, nr, nr + 1));
        auto A = assemble_laplacian_matrix(*g, metric, a);
        auto u = GridFunction::sample(g, [&](const ConePoint& x) { return form(x); });
        Eigen::Map<const Eigen::VectorXd> uv(u.values().data(), static_cast<long>(u.size()));
        Eigen::VectorXd Au = A * uv;
        double err = 0.0;
        for (std::size_t n = 0; n < u.size(); ++n) {
            const long idx = static_cast<long>(n);
            const auto x = g->point(idx);
            if (g->is_boundary(idx) || x.r(0) < 0.3) continue;
            Eigen::MatrixXd h = gen(x, 0.0).inverse();
            double exact = 0.5 * (h(0, 0) + h(1, 1)) * form.apply(TOperator::laplacian(0), x, a);
            exact += h(2, 2) * form.apply(TOperator::tangential(0, 0), x, a) + h(3, 3) * form.apply(TOperator::tangential(1, 1), x, a);
            exact += 2 * h(0, 2) * form.apply(TOperator::cone_tangential(0, NDir::Radial, 0), x, a);
            exact += 2 * h(1, 3) * form.apply(TOperator::cone_tangential(0, NDir::Angular, 1), x, a);
            exact += 2 * h(0, 3) * form.apply(TOperator::cone_tangential(0, NDir::Radial, 1), x, a);
            exact += 2 * h(1, 2) * form.apply(TOperator::cone_tangential(0, NDir::Angular, 0), x, a);
            exact += 2 * h(2, 3) * form.apply(TOperator::tangential(0, 1), x, a);
            err = std::max(err, std::abs(Au[idx] - exact));
        }
        errs.push_back(err);
    }
    // The field is quadratic in r and s, so every stencil is exact.
    for (double e : errs) EXPECT_LT(e, 1e-9);
}

TEST(ClosedForm, DerivativesOfReZ) {
    ConeAngles a({0.75}, 1);
    auto form = fields::re_z_power(0, 1, a);
    ConePoint x({{0.4, 0.9}}, {});
    EXPECT_NEAR(form.apply(FirstOrder::cone(0, NDir::Radial), x, a),
                std::pow(0.4, 1 / 0.75 - 1) * std::cos(0.9) / 0.75, 1e-14);
    EXPECT_NEAR(form.laplacian(x, a), 0.0, 1e-13);
    EXPECT_NEAR(fields::radial_power(0, 2.0).laplacian(x, a), 4.0, 1e-13);
}
