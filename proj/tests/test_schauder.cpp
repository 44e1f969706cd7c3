#include <gtest/gtest.h>

#include <sstream>

#include "conelab/schauder_lab.hpp"

using namespace conelab;

namespace {

ConePoint dilate(const ConePoint& x, double l) {
    auto pol = x.polar();
    for (auto& c : pol) c.r *= l;
    auto tan = x.tangential();
    for (double& s : tan) s *= l;
    return ConePoint(pol, tan);
}

double harmonic_witness(const ConePoint& x, double beta) { return std::pow(x.r(0), 1.0 / beta) * std::cos(x.theta(0)) * x.s(0); }

SchauderProblem witness_problem(double beta) {
    SchauderProblem pb{ConeAngles({beta}, 2)};
    pb.alpha = 0.05;
    pb.boundary = [beta](const ConePoint& x) { return harmonic_witness(x, beta); };
    pb.grid.radial_intervals = 64;
    pb.grid.tangential_axes = 1;
    pb.grid.tangential_nodes = 9;
    return pb;
}

// slope of log y against k by least squares
double log_slope(const std::vector<int>& k, const std::vector<double>& y) {
    double mk = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        mk += k[i];
        my += std::log(y[i]);
    }
    mk /= k.size();
    my /= k.size();
    double skk = 0.0, sky = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        skk += (k[i] - mk) * (k[i] - mk);
        sky += (k[i] - mk) * (std::log(y[i]) - my);
    }
    return sky / skk;
}

struct LadderFixture {
    ConeAngles angles{{0.75}, 2};
    Evaluator f = [](const ConePoint& x) { return std::pow(x.r(0), 0.3); };
    SolveReport base;
    ConePoint p;
    DyadicLadderConfig cfg;

    explicit LadderFixture(Evaluator rhs = nullptr, Evaluator boundary = nullptr) {
        if (rhs) f = rhs;
        EllipticProblem ep{angles, {}, GridSpec{}, f};
        if (boundary) ep.boundary = boundary;
        base = solve_dirichlet(ep);
        const double r1 = base.solution.grid().factor(0).r[1];
        p = ConePoint({PolarCoord{r1, 0.0}}, {0.0, 0.0});
        cfg.omega = [](double d) { return std::pow(d, 0.3); };
    }
};

} // namespace

TEST(Witness, SingleFactorRadialDerivativeExponent) {
    const ConeAngles a({0.75}, 2);
    const auto rep = sharpness_witness(a);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_NEAR(rep.rows[0].fit.alpha, 1.0 / 3.0, 0.01);
}

TEST(Witness, MixedFactorsTakeTheLargerAngle) {
    const ConeAngles a({0.6, 0.9}, 3);
    const auto rep = sharpness_witness(a);
    const auto [fitted, expected] = mixed_witness_exponent(rep, 0, 1);
    EXPECT_NEAR(expected, 1.0 / 9.0, 1e-12);
    EXPECT_NEAR(fitted, 1.0 / 9.0, 0.03);
    EXPECT_LT(rep.worst_error(), 0.01);
}

TEST(MeasureSchauder, HarmonicDataRadialExponent) {
    SchauderProblem pb{ConeAngles({0.75}, 2)};
    pb.boundary = [](const ConePoint& x) { return std::pow(x.r(0), 4.0 / 3.0) * std::cos(x.theta(0)); };
    pb.grid.radial_intervals = 64;
    pb.grid.tangential_axes = 1;
    pb.grid.tangential_nodes = 9;
    const auto t = measure_schauder(pb);
    ASSERT_NE(t.find("N1r"), nullptr);
    EXPECT_NEAR(t.find("N1r")->alpha, 1.0 / 3.0, 0.05);
    EXPECT_TRUE(t.admissible);
}

TEST(MeasureSchauder, PolynomialForceCapsMixedDerivative) {
    // Delta u = s^2 with u = Re z_1 s + s^4/12 on the boundary: smooth data, solution carries the witness mode
    const double b = 0.9;
    SchauderProblem pb{ConeAngles({b}, 2)};
    pb.alpha = 0.05;
    pb.rhs = [](const ConePoint& x) { return x.s(0) * x.s(0); };
    pb.boundary = [=](const ConePoint& x) { return harmonic_witness(x, b) + std::pow(x.s(0), 4) / 12.0; };
    pb.grid.radial_intervals = 64;
    pb.grid.tangential_axes = 1;
    pb.grid.tangential_nodes = 17;
    const auto t = measure_schauder(pb);
    EXPECT_NEAR(t.find("N1r_D1")->alpha, 1.0 / 9.0, 0.03);
    EXPECT_TRUE(std::isfinite(t.ratio));
    EXPECT_GT(t.ratio, 0.0);
}

TEST(MeasureSchauder, RoughForceLaplacianExponent) {
    SchauderProblem pb{ConeAngles({0.8}, 2)};
    pb.alpha = 0.1;
    pb.rhs = [](const ConePoint& x) { return std::pow(x.r(0), 0.2); };
    pb.grid.radial_intervals = 64;
    pb.grid.grading = 3.0;
    pb.grid.tangential_axes = 0;
    const auto t = measure_schauder(pb);
    EXPECT_NEAR(t.find("Delta1")->alpha, 0.2, 0.05);
}

TEST(MeasureSchauder, AlphaAtOrPastTheCapIsFlagged) {
    auto pb = witness_problem(0.8);
    pb.alpha = 0.3;
    EXPECT_FALSE(measure_schauder(pb).admissible);
    pb.alpha = 0.0;
    EXPECT_THROW(measure_schauder(pb), UsageError);
}

TEST(MeasureSchauder, CapIsMonotoneInBeta) {
    double prev = INFINITY;
    for (double b : {0.55, 0.7, 0.85}) {
        const auto t = measure_schauder(witness_problem(b));
        const double fit = t.find("N1r_D1")->alpha;
        EXPECT_NEAR(fit, 1.0 / b - 1.0, 0.05) << "beta " << b;
        EXPECT_LE(fit, prev) << "beta " << b;
        prev = fit;
    }
}

TEST(MeasureSchauder, RatioIsScaleInvariant) {
    const double b = 0.75;
    auto rhs = [](const ConePoint& x) { return 1.0 + std::pow(x.r(0), 0.4) * std::cos(x.theta(0)) + x.s(0) * x.s(0); };
    auto bc = [b](const ConePoint& x) { return harmonic_witness(x, b) + 0.3 * x.s(0); };
    SchauderProblem unit{ConeAngles({b}, 2)};
    unit.alpha = 0.2;
    unit.rhs = rhs;
    unit.boundary = bc;
    unit.grid.tangential_axes = 1;
    unit.grid.tangential_nodes = 17;
    SchauderProblem half = unit;
    half.rhs = [rhs](const ConePoint& x) { return 4.0 * rhs(dilate(x, 2.0)); };
    half.boundary = [bc](const ConePoint& x) { return bc(dilate(x, 2.0)); };
    half.grid.radius = 0.5;
    half.grid.half_width = 0.5;
    const auto t1 = measure_schauder(unit);
    const auto t2 = measure_schauder(half);
    EXPECT_GT(t1.ratio, 0.0);
    EXPECT_NEAR(t2.ratio / t1.ratio, 1.0, 0.10);
}

TEST(Blowup, RatioGrowsTowardTheCapAndFits) {
    const double b = 0.8, cap = 0.25;
    std::vector<double> alphas;
    for (double q : {0.5, 0.6, 0.7, 0.8, 0.9}) alphas.push_back(q * cap);
    const auto scan = constant_blowup_scan(b, alphas);
    EXPECT_NEAR(scan.cap, cap, 1e-12);
    EXPECT_TRUE(scan.monotone());
    EXPECT_LE(scan.relative_rms, kBlowupFitThreshold);
    EXPECT_GT(scan.b, 0.0);
    EXPECT_LT(scan.rows.front().ratio, 10.0); // far from the cap the constant is modest
}

TEST(Blowup, CapPositionsFollowBeta) {
    for (double b : {0.6, 0.9}) {
        const double cap = 1.0 / b - 1.0;
        const auto scan = constant_blowup_scan(b, {0.3 * cap, 0.6 * cap, 0.9 * cap});
        EXPECT_NEAR(scan.cap, cap, 1e-12);
        for (const auto& r : scan.rows) EXPECT_TRUE(std::isfinite(r.ratio) && r.ratio > 0.0);
        EXPECT_GT(scan.rows.back().ratio, scan.rows.front().ratio);
        EXPECT_THROW(constant_blowup_scan(b, {0.3 * cap, 0.6 * cap, cap}), UsageError);
    }
}

TEST(Blowup, DegenerateGridsAreRejected) {
    EXPECT_THROW(constant_blowup_scan(0.8, {0.1, 0.2}), UsageError);
    EXPECT_THROW(constant_blowup_scan(0.8, {0.2, 0.1, 0.15}), UsageError);
}

TEST(Blowup, LacunaryForceIsBoundedInAlpha) {
    // the data side of the ratio must stay bounded: the growth is in the solution
    const auto scan = constant_blowup_scan(0.8, {0.125, 0.175, 0.225});
    const double lo = scan.rows.front().f_norm, hi = scan.rows.back().f_norm;
    EXPECT_LT(std::max(lo, hi) / std::min(lo, hi), 1.5);
    EXPECT_GT(scan.rows.back().numerator / scan.rows.front().numerator, 2.0);
}

TEST(Ladder, GapsTrackTheModulus) {
    LadderFixture fx;
    const auto rep = dyadic_ladder(fx.p, fx.base.solution, fx.f, fx.angles, fx.cfg);
    ASSERT_EQ(rep.levels.size(), 5u);
    for (const auto& l : rep.levels) {
        EXPECT_EQ(l.regime, 2) << "k " << l.k;
        EXPECT_GT(l.gap, 0.0);
        EXPECT_LE(l.ratio, 1.0) << "k " << l.k;
    }
    EXPECT_LE(rep.max_ratio() / rep.min_ratio(), 10.0);
}

TEST(Ladder, SuccessiveGapsDecayAtTheModulusRate) {
    LadderFixture fx;
    const auto rep = dyadic_ladder(fx.p, fx.base.solution, fx.f, fx.angles, fx.cfg);
    std::vector<int> k;
    std::vector<double> step, bound;
    for (const auto& l : rep.levels) {
        k.push_back(l.k);
        step.push_back(l.step_gap);
        bound.push_back(l.bound);
    }
    EXPECT_LE(log_slope(k, step), log_slope(k, bound));
}

TEST(Ladder, ZeroAndConstantForcesGiveZeroGaps) {
    for (double c : {0.0, 2.5}) {
        LadderFixture fx([c](const ConePoint&) { return c; }, [](const ConePoint& x) { return x.s(0) + x.r(0) * x.r(0); });
        fx.cfg.solve.linear.tol = 1e-13;
        const auto rep = dyadic_ladder(fx.p, fx.base.solution, fx.f, fx.angles, fx.cfg);
        for (const auto& l : rep.levels) {
            EXPECT_LT(l.gap, 1e-9) << "c " << c << " k " << l.k;
            EXPECT_LT(l.step_gap, 1e-9) << "c " << c << " k " << l.k;
        }
    }
}

TEST(Ladder, RecenteringLeavesGapsUnchanged) {
    LadderFixture fx;
    const double fp = fx.f(fx.p), c = fp * shift_constant(2);
    const auto shifted_f = [f = fx.f, fp](const ConePoint& x) { return f(x) - fp; };
    auto shifted_u = fx.base.solution;
    const auto& g = shifted_u.grid();
    for (std::size_t n = 0; n < g.size(); ++n) {
        const auto x = g.point(static_cast<long>(n));
        shifted_u[n] -= c * (x.s(0) * x.s(0) + x.s(1) * x.s(1));
    }
    const auto a = dyadic_ladder(fx.p, fx.base.solution, fx.f, fx.angles, fx.cfg);
    const auto b = dyadic_ladder(fx.p, shifted_u, shifted_f, fx.angles, fx.cfg);
    ASSERT_EQ(a.levels.size(), b.levels.size());
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
        EXPECT_NEAR(a.levels[i].gap, b.levels[i].gap, 1e-9 + 1e-6 * a.levels[i].gap);
        EXPECT_NEAR(a.levels[i].step_gap, b.levels[i].step_gap, 1e-9 + 1e-6 * a.levels[i].step_gap);
    }
}

TEST(Ladder, RegimesSwitchAtThePointScale) {
    LadderFixture fx;
    // a point at distance ~0.1 from the stratum: k >= 4 stays away from it
    const auto& g = fx.base.solution.grid();
    double r = 0.0;
    for (double ri : g.factor(0).r)
        if (ri > 0.08) {
            r = ri;
            break;
        }
    const ConePoint q({PolarCoord{r, 0.0}}, {0.0, 0.0});
    fx.cfg.k_max = 4;
    const auto rep = dyadic_ladder(q, fx.base.solution, fx.f, fx.angles, fx.cfg);
    int kp = 0;
    while (std::pow(kTau, kp) >= r) ++kp;
    for (const auto& l : rep.levels) {
        EXPECT_EQ(l.regime, l.k >= kp ? 1 : 2) << "k " << l.k;
        EXPECT_NEAR(l.radius, (l.k >= kp ? 1.0 : 2.0) * std::pow(kTau, l.k), 1e-15);
    }
}

TEST(Ladder, RejectsBadPoints) {
    LadderFixture fx;
    const ConePoint apex({PolarCoord{0.0, 0.0}}, {0.0, 0.0});
    EXPECT_THROW(dyadic_ladder(apex, fx.base.solution, fx.f, fx.angles, fx.cfg), UsageError);
    const ConePoint near({PolarCoord{1e-4, 0.0}}, {0.0, 0.0});
    fx.cfg.k_max = 20;
    EXPECT_THROW(dyadic_ladder(near, fx.base.solution, fx.f, fx.angles, fx.cfg), UsageError);
    fx.cfg.k_max = 6;
    fx.cfg.omega = nullptr;
    EXPECT_THROW(dyadic_ladder(fx.p, fx.base.solution, fx.f, fx.angles, fx.cfg), UsageError);
}

TEST(ScanCsv, ColumnsAndDeterminism) {
    const ConeAngles a({0.6, 0.9}, 3);
    const auto w = sharpness_witness(a);
    const auto scan = constant_blowup_scan(0.8, {0.125, 0.175, 0.225}, BlowupConfig{40, 4});
    auto rows = csv_rows(w, a);
    const auto more = csv_rows(scan);
    rows.insert(rows.end(), more.begin(), more.end());
    std::ostringstream one, two;
    write_scan_csv(one, rows);
    write_scan_csv(two, rows);
    EXPECT_EQ(one.str(), two.str());
    std::istringstream in(one.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "beta1,beta2,alpha,operator,fitted_exponent,ratio,residual,seed");
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7) << line;
        ++lines;
    }
    EXPECT_EQ(lines, rows.size());
}
