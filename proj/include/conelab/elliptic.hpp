#pragma once

#include <optional>
#include <random>

#include "conelab/cartesian.hpp"
#include "conelab/linear_solve.hpp"
#include "conelab/operators.hpp"

namespace conelab {

using Evaluator = std::function<double(const ConePoint&)>;

enum class DomainKind { Polydisk, ConeBall };

struct Domain {
    DomainKind kind = DomainKind::Polydisk;
    double radius = 1.0; // cone-ball radius; the polydisk uses the grid radius
};

struct EllipticProblem {
    ConeAngles angles;
    Domain domain;
    GridSpec grid;
    Evaluator rhs = [](const ConePoint&) { return 0.0; };
    Evaluator boundary = [](const ConePoint&) { return 0.0; };
    MetricField metric;
};

struct SolveConfig {
    LinearSolveOptions linear;
    std::optional<std::vector<double>> initial_guess;
    // Nodal bound on |L u - f| / max(1, |f|); the Krylov tolerance is tightened until it holds.
    // Negative: use linear.tol.
    double consistency_tol = -1.0;
};

struct SolveReport {
    GridFunction solution;
    std::vector<char> dirichlet;
    double residual = 0.0;             // relative residual of the solved linear system
    double consistency_residual = 0.0; // max |L u - f| over unknown rows, relative to max(1, |f|)
    int iterations = 0;
    std::vector<double> history;
    double boundary_min = 0.0, boundary_max = 0.0;
    bool symmetric = true;
};

/// Radial projection onto the metric sphere of radius R (a cone dilation).
inline ConePoint project_to_sphere(const ConePoint& x, double R) {
    double d2 = 0.0;
    for (const auto& c : x.polar()) d2 += c.r * c.r;
    for (double s : x.tangential()) d2 += s * s;
    const double d = std::sqrt(d2);
    if (d == 0.0) return x;
    const double k = R / d;
    auto pol = x.polar();
    for (auto& c : pol) c.r *= k;
    auto tan = x.tangential();
    for (double& s : tan) s *= k;
    return ConePoint(pol, tan);
}

/// Grid boundary, plus (cone-ball domains) every node at metric distance >= R from the origin.
inline std::vector<char> domain_mask(const Grid& g, const Domain& domain) {
    auto mask = boundary_mask(g);
    if (domain.kind == DomainKind::ConeBall) {
        require(domain.radius > 0.0 && domain.radius <= 1.0, "Domain: ball radius must lie in (0,1]");
        for (std::size_t n = 0; n < g.size(); ++n) {
            const auto x = g.point(static_cast<long>(n));
            double d2 = 0.0;
            for (const auto& c : x.polar()) d2 += c.r * c.r;
            for (double s : x.tangential()) d2 += s * s;
            if (d2 >= domain.radius * domain.radius) mask[n] = 1;
        }
    }
    return mask;
}

/// Solves L u = f on unknown nodes with u fixed on masked nodes; `u` carries the boundary values in and the solution out.
inline SolveReport solve_on_grid(const std::shared_ptr<const Grid>& grid, const std::vector<char>& dirichlet,
                                 const std::vector<double>& f, std::vector<double> u, const MetricField& metric,
                                 const SolveConfig& cfg) {
    const Grid& g = *grid;
    require(f.size() == g.size() && u.size() == g.size(), "solve: field size mismatch");
    for (std::size_t n = 0; n < g.size(); ++n) require(std::isfinite(f[n]) && std::isfinite(u[n]), "solve: non-finite data");
    SolveReport rep;
    rep.dirichlet = dirichlet;
    rep.boundary_min = std::numeric_limits<double>::infinity();
    rep.boundary_max = -rep.boundary_min;
    double bsum = 0.0;
    long bcount = 0;
    for (std::size_t n = 0; n < g.size(); ++n)
        if (dirichlet[n]) {
            rep.boundary_min = std::min(rep.boundary_min, u[n]);
            rep.boundary_max = std::max(rep.boundary_max, u[n]);
            bsum += u[n];
            ++bcount;
        }
    const SparseMatrix L = assemble_operator(g, metric, 0.0, dirichlet);
    Partition part(dirichlet);
    Eigen::VectorXd x0;
    if (cfg.initial_guess) {
        require(cfg.initial_guess->size() == g.size(), "solve: initial guess size mismatch");
        x0 = part.gather(*cfg.initial_guess);
    } else {
        x0 = Eigen::VectorXd::Constant(part.size(), bcount ? bsum / bcount : 0.0);
    }
    // Scaled system: -V L (symmetric positive definite) for the flat metric, -L otherwise.
    std::vector<double> scale = metric.is_flat() ? node_volumes(g) : std::vector<double>(g.size(), 1.0);
    for (double& v : scale) v = -v;
    rep.symmetric = metric.is_flat();
    const SparseMatrix K = part.restrict_matrix(L, &scale);
    Eigen::VectorXd b = part.boundary_action(L, u, &scale);
    for (long k = 0; k < part.size(); ++k) b[k] = scale[part.unknowns[k]] * f[part.unknowns[k]] - b[k];
    double fscale = 1.0;
    for (long k = 0; k < part.size(); ++k) fscale = std::max(fscale, std::abs(f[part.unknowns[k]]));
    const double target = cfg.consistency_tol >= 0.0 ? cfg.consistency_tol : cfg.linear.tol;
    auto nodal = [&](const Eigen::VectorXd& x) {
        // K x - b = scale * (L u - f) on unknown rows
        const Eigen::VectorXd r = K * x - b;
        double worst = 0.0;
        for (long k = 0; k < part.size(); ++k) worst = std::max(worst, std::abs(r[k] / scale[part.unknowns[k]]));
        return worst / fscale;
    };
    LinearSolveOptions opt = cfg.linear;
    for (int attempt = 0;; ++attempt) {
        LinearSolveResult res;
        try {
            res = rep.symmetric ? solve_spd(K, b, x0, opt) : solve_general(K, b, x0, opt);
        } catch (const SolverError&) {
            if (attempt == 0) throw;
            break; // round-off floor: keep the last converged iterate
        }
        rep.iterations += res.iterations;
        rep.residual = res.relative_residual;
        rep.history.insert(rep.history.end(), res.history.begin(), res.history.end());
        x0 = std::move(res.x);
        rep.consistency_residual = nodal(x0);
        if (rep.consistency_residual <= target || attempt == 4 || opt.tol <= 1e-15) break;
        opt.tol = std::max(1e-15, opt.tol * std::max(1e-3, 0.5 * target / rep.consistency_residual));
    }
    part.scatter(x0, u);
    rep.solution = GridFunction(grid, std::move(u));
    return rep;
}

inline SolveReport solve_dirichlet(const EllipticProblem& problem, const SolveConfig& cfg = {}) {
    auto grid = make_grid(problem.angles, problem.grid);
    const auto mask = domain_mask(*grid, problem.domain);
    std::vector<double> f(grid->size()), u(grid->size(), 0.0);
    for (std::size_t n = 0; n < grid->size(); ++n) {
        const auto x = grid->point(static_cast<long>(n));
        f[n] = problem.rhs(x);
        if (!mask[n]) continue;
        const bool outside = problem.domain.kind == DomainKind::ConeBall && !grid->is_boundary(static_cast<long>(n));
        u[n] = problem.boundary(outside || problem.domain.kind == DomainKind::ConeBall
                                    ? project_to_sphere(x, std::min(problem.domain.radius, 1.0))
                                    : x);
    }
    return solve_on_grid(grid, mask, f, std::move(u), problem.metric, cfg);
}

/// Constant c in u = c * sum s_k^2 with Delta u = 1, for the tangential axes present on a grid.
inline double shift_constant(int tangential_axes) {
    require(tangential_axes > 0, "shift_constant: needs at least one tangential coordinate");
    return 1.0 / (2.0 * tangential_axes);
}
inline double shift_constant(const ConeAngles& angles) { return shift_constant(angles.tangential_dims()); }

// ---------------------------------------------------------------- eps ladder

struct LadderStep {
    double eps = 0.0;
    CartesianField solution;
    int iterations = 0;
    double residual = 0.0;
    double gap_to_previous = std::numeric_limits<double>::quiet_NaN(); // sup |u_eps - u_prev|
};

struct CartesianSpec {
    int nodes_per_side = 65;
    Convention convention = Convention::Conical;
};

inline std::vector<LadderStep> solve_via_epsilon_ladder(const EllipticProblem& problem, const std::vector<double>& schedule,
                                                        const CartesianSpec& cs = {}, const LinearSolveOptions& opt = {}) {
    require(!schedule.empty(), "eps ladder: empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        require(schedule[k] > 0.0, "eps ladder: every eps must be positive");
        if (k > 0) require(schedule[k] < schedule[k - 1], "eps ladder: schedule must be strictly decreasing");
    }
    require(problem.metric.is_flat(), "eps ladder: only the flat cone metric is regularized");
    require(problem.domain.kind == DomainKind::Polydisk, "eps ladder: polydisk domains only");
    auto cone_grid = make_grid(problem.angles, problem.grid);
    auto grid = std::make_shared<const CartesianGrid>(problem.angles, cs.nodes_per_side, problem.grid.radius,
                                                      cone_grid->tangentials());
    std::vector<LadderStep> out;
    for (double eps : schedule) {
        const std::vector<double>* guess = out.empty() ? nullptr : &out.back().solution.values;
        auto s = solve_regularized(grid, eps, problem.rhs, problem.boundary, cs.convention, guess, opt);
        LadderStep step{eps, std::move(s.solution), s.iterations, s.residual};
        if (!out.empty()) {
            double gap = 0.0;
            for (std::size_t n = 0; n < step.solution.values.size(); ++n)
                gap = std::max(gap, std::abs(step.solution.values[n] - out.back().solution.values[n]));
            step.gap_to_previous = gap;
        }
        out.push_back(std::move(step));
    }
    return out;
}

/// sup over Cartesian nodes inside the domain of |u_cone - u_cart|, divided by sup |u_cart|.
inline double relative_sup_difference(const GridFunction& cone, const CartesianField& cart) {
    const auto& g = *cart.grid;
    double diff = 0.0, scale = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        if (!g.inside(idx)) continue;
        const double c = cone.interpolate(g.point(idx));
        diff = std::max(diff, std::abs(c - cart.values[n]));
        scale = std::max(scale, std::abs(cart.values[n]));
    }
    return scale > 0.0 ? diff / scale : diff;
}

// ---------------------------------------------------------------- diagnostics

struct MaxPrincipleDiagnostic {
    double lower = 0.0, upper = 0.0; // boundary range
    double delta = 0.0;
    double worst_violation = 0.0;    // max over unknown nodes of the excursion beyond [lower, upper]
    long violations = 0;             // nodes beyond delta
    [[nodiscard]] bool ok() const { return violations == 0; }
};

/// Discrete maximum principle for a zero-RHS report. delta defaults to a solver-tolerance scale.
inline MaxPrincipleDiagnostic check_maximum_principle(const SolveReport& rep, double delta = -1.0) {
    MaxPrincipleDiagnostic d;
    d.lower = rep.boundary_min;
    d.upper = rep.boundary_max;
    const double scale = std::max({1.0, std::abs(d.lower), std::abs(d.upper)});
    d.delta = delta >= 0.0 ? delta : 1e-7 * scale;
    for (std::size_t n = 0; n < rep.solution.size(); ++n) {
        if (rep.dirichlet[n]) continue;
        const double v = rep.solution[n];
        const double ex = std::max(d.lower - v, v - d.upper);
        d.worst_violation = std::max(d.worst_violation, ex);
        if (ex > d.delta) ++d.violations;
    }
    return d;
}

struct EstimateRow {
    std::string quantity;
    int order = 0;
    double ball_fraction = 0.0;
    double sup = 0.0;
    double measured_constant = 0.0; // sup * R^order / osc
    bool ok = true;
};

struct EstimateTable {
    double radius = 0.0;
    double oscillation = 0.0;
    double bound_constant = 50.0;
    std::vector<EstimateRow> rows;
    [[nodiscard]] bool ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const EstimateRow& r) { return r.ok; });
    }
};

/// Interior gradient, singular-direction and mixed-derivative bounds for a harmonic u on B(0,R).
inline EstimateTable verify_interior_estimates(const GridFunction& u, const ConeAngles& angles, double R, double C = 50.0) {
    check_grid_angles(u.grid(), angles);
    const Grid& g = u.grid();
    require(R > 0.0 && R <= g.factor(0).radius, "verify_interior_estimates: radius outside the grid");
    EstimateTable t;
    t.radius = R;
    t.bound_constant = C;
    auto dist0 = [&](long idx) { return cone_distance(ConePoint::origin(angles), g.point(idx), angles); };
    std::vector<double> dist(g.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, umax = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        dist[n] = dist0(static_cast<long>(n));
        if (dist[n] < R) {
            lo = std::min(lo, u[n]);
            hi = std::max(hi, u[n]);
            umax = std::max(umax, std::abs(u[n]));
        }
    }
    t.oscillation = hi - lo;
    const double slack = 1e-9 * (1.0 + umax);
    auto add_row = [&](const std::string& name, int order, double frac, const GridFunction& field, bool sqrt_it) {
        EstimateRow row{name, order, frac};
        for (std::size_t n = 0; n < g.size(); ++n)
            if (dist[n] < frac * R && !g.is_boundary(static_cast<long>(n)))
                row.sup = std::max(row.sup, sqrt_it ? std::sqrt(field[n]) : std::abs(field[n]));
        const double scale = std::pow(R, order);
        row.measured_constant = t.oscillation > 0.0 ? row.sup * scale / t.oscillation : 0.0;
        row.ok = row.sup <= C * t.oscillation / scale + slack;
        t.rows.push_back(row);
    };
    add_row("gradient", 1, 2.0 / 3.0, gradient_norm_sq(u), true);
    for (const auto& op : all_t_operators(angles, g.tangential_axes()))
        add_row(op.name(), 2, 0.5, apply_T(u, op, angles), false);
    return t;
}

// ---------------------------------------------------------------- barriers

enum class BoundaryClass { AllStrata, OffStrata, SingleStratum };

inline const char* to_string(BoundaryClass c) {
    switch (c) {
    case BoundaryClass::AllStrata: return "all-strata";
    case BoundaryClass::OffStrata: return "off-strata";
    default: return "single-stratum";
    }
}

struct BarrierConfig {
    int samples = 1000;
    int nodes_per_side = 17;
    int tangential_nodes = 9;
    double eps = 1e-3;
    double margin = 1e-6;
    double A = -1.0; // negative: search the doubling schedule 2^-10, 2^-9, ...
    std::uint64_t seed = 1;
};

struct BarrierReport {
    BoundaryClass cls = BoundaryClass::AllStrata;
    double A = 0.0;
    double exterior_radius = 0.0;     // r_q for the exterior-sphere classes
    double psi_at_q = 0.0;
    double max_psi_elsewhere = 0.0;   // should be < 0
    double min_laplacian = 0.0;       // min of the discrete Delta_{g_eps} of the barrier inside the ball
    int samples = 0;
    bool sign_ok = false;
    bool subharmonic = false;
    [[nodiscard]] bool ok() const { return sign_ok && subharmonic; }
};

namespace barrier_detail {

inline double cone_radius_sq(const std::vector<std::complex<double>>& z, const ConeAngles& a) {
    double d = 0.0;
    for (int j = 0; j < a.p(); ++j) d += std::pow(std::norm(z[j]), a.beta(j));
    for (int k = a.p(); k < a.n(); ++k) d += std::norm(z[k]);
    return d;
}

inline double euclid_sq(const std::vector<std::complex<double>>& z, const std::vector<std::complex<double>>& w) {
    double d = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) d += std::norm(z[k] - w[k]);
    return d;
}

// Uniformly spread points of the unit metric sphere: a random unit vector in
// (r_1..r_p, s) with |r_j| as the weighted radii and random phases.
inline std::vector<std::vector<std::complex<double>>> sphere_samples(const ConeAngles& a, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::vector<std::vector<std::complex<double>>> out;
    const int t = a.tangential_dims();
    for (int c = 0; c < count; ++c) {
        std::vector<double> v(a.p() + t);
        double norm = 0.0;
        for (double& x : v) {
            x = nd(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        std::vector<std::complex<double>> z(a.n());
        for (int j = 0; j < a.p(); ++j) z[j] = std::polar(std::pow(std::abs(v[j]) / norm, 1.0 / a.beta(j)), phase(rng));
        for (int k = 0; k < t; ++k) {
            auto& slot = z[a.p() + k / 2];
            const double s = v[a.p() + k] / norm;
            slot = k % 2 == 0 ? std::complex<double>(s, slot.imag()) : std::complex<double>(slot.real(), s);
        }
        out.push_back(std::move(z));
    }
    return out;
}

} // namespace barrier_detail

inline BoundaryClass classify_boundary_point(const std::vector<std::complex<double>>& q, const ConeAngles& a) {
    int zero = 0;
    for (int j = 0; j < a.p(); ++j) zero += q[j] == std::complex<double>(0.0, 0.0) ? 1 : 0;
    if (zero == a.p()) return BoundaryClass::AllStrata;
    if (zero == 0) return BoundaryClass::OffStrata;
    return BoundaryClass::SingleStratum;
}

/// Builds the barrier of the point's class and checks its sign pattern on sphere samples and its
/// discrete Delta_{g_eps}-subharmonicity on Cartesian nodes inside the unit ball.
inline BarrierReport barrier_validate(const std::vector<std::complex<double>>& q, BoundaryClass claimed,
                                      const ConeAngles& a, const BarrierConfig& cfg = {}) {
    using namespace barrier_detail;
    require(static_cast<int>(q.size()) == a.n(), "barrier_validate: q must have n entries");
    require(std::abs(cone_radius_sq(q, a) - 1.0) < 1e-10, "barrier_validate: q is not on the unit metric sphere");
    const BoundaryClass cls = classify_boundary_point(q, a);
    if (cls != claimed) throw UsageError("barrier_validate: classification mismatch");
    const int n = a.n();
    BarrierReport rep;
    rep.cls = cls;

    // Base functions: psi = A * scaled + fixed.
    std::function<double(const std::vector<std::complex<double>>&)> scaled, fixed;
    auto samples = sphere_samples(a, cfg.samples, cfg.seed);
    if (cls == BoundaryClass::AllStrata) {
        std::vector<std::complex<double>> qp(q.size());
        for (std::size_t k = 0; k < q.size(); ++k) qp[k] = -q[k];
        scaled = [qp](const auto& z) { return euclid_sq(z, qp) - 4.0; };
        fixed = [](const auto&) { return 0.0; };
    } else {
        // Outward normal of the level set of F at q; F is the cone ball, or for a single
        // stratum the ball of the metric singular along the non-vanishing factors only.
        std::vector<std::complex<double>> normal(n);
        double nn = 0.0;
        for (int j = 0; j < n; ++j) {
            const bool conical = j < a.p() && q[j] != std::complex<double>(0.0, 0.0);
            normal[j] = conical ? 2.0 * a.beta(j) * std::pow(std::abs(q[j]), 2.0 * a.beta(j) - 2.0) * q[j] : 2.0 * q[j];
            nn += std::norm(normal[j]);
        }
        nn = std::sqrt(nn);
        for (auto& c : normal) c /= nn;
        double rq = 0.5;
        for (int j = 0; j < a.p(); ++j)
            if (q[j] != std::complex<double>(0.0, 0.0)) rq = std::min(rq, 0.5 * std::abs(q[j]));
        std::vector<std::complex<double>> center;
        for (int attempt = 0; attempt < 60; ++attempt, rq *= 0.5) {
            center.assign(n, {});
            for (int j = 0; j < n; ++j) center[j] = q[j] + rq * normal[j];
            bool clear = true;
            for (const auto& z : samples)
                if (euclid_sq(z, center) < rq * rq * (1.0 - 1e-12)) {
                    clear = false;
                    break;
                }
            if (clear) break;
        }
        rep.exterior_radius = rq;
        const double power = 2.0 * n - 2.0;
        fixed = [center, rq, power](const auto& z) {
            const double d = std::sqrt(euclid_sq(z, center));
            return power == 0.0 ? -std::log(d / rq) : std::pow(d, -power) - std::pow(rq, -power);
        };
        scaled = [a](const auto& z) { return cone_radius_sq(z, a) - 1.0; };
    }

    // Discrete Laplacians of the two parts on the Cartesian polydisk covering the ball.
    std::vector<TangentialAxis> tan;
    for (int k = 0; k < a.tangential_dims(); ++k) tan.push_back(TangentialAxis::uniform(cfg.tangential_nodes, -1.0, 1.0, false));
    auto grid = std::make_shared<const CartesianGrid>(a, cfg.nodes_per_side, 1.0, tan);
    CartesianField fs{grid, std::vector<double>(grid->size())}, ff{grid, std::vector<double>(grid->size())};
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const auto z = grid->z(static_cast<long>(k));
        fs.values[k] = scaled(z);
        ff.values[k] = fixed(z);
    }
    const auto ls = apply_regularized_laplacian(fs, cfg.eps, a);
    const auto lf = apply_regularized_laplacian(ff, cfg.eps, a);
    std::vector<long> inner;
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const long idx = static_cast<long>(k);
        if (!grid->inside(idx) || cone_radius_sq(grid->z(idx), a) >= 1.0) continue;
        bool full = true;
        for (int ax = 0; ax < grid->axis_count() && full; ++ax) {
            const int loc = grid->local(idx, ax);
            const int last = ax < 2 * a.p() ? grid->nodes_per_side() - 1 : grid->tangential(ax - 2 * a.p()).nodes - 1;
            full = loc > 0 && loc < last;
        }
        if (full) inner.push_back(idx);
    }
    require(!inner.empty(), "barrier_validate: Cartesian grid too coarse");
    auto min_lap = [&](double A) {
        double m = std::numeric_limits<double>::infinity();
        for (long idx : inner) m = std::min(m, A * ls[idx] + lf[idx]);
        return m;
    };
    if (cfg.A >= 0.0) {
        rep.A = cfg.A;
    } else {
        rep.A = std::ldexp(1.0, -10);
        while (min_lap(rep.A) < cfg.margin && rep.A < std::ldexp(1.0, 40)) rep.A *= 2.0;
    }
    rep.min_laplacian = min_lap(rep.A);
    rep.subharmonic = rep.min_laplacian >= cfg.margin;

    auto psi = [&](const std::vector<std::complex<double>>& z) { return rep.A * scaled(z) + fixed(z); };
    rep.psi_at_q = psi(q);
    rep.max_psi_elsewhere = -std::numeric_limits<double>::infinity();
    for (const auto& z : samples) {
        if (euclid_sq(z, q) < 1e-20) continue;
        rep.max_psi_elsewhere = std::max(rep.max_psi_elsewhere, psi(z));
    }
    rep.samples = static_cast<int>(samples.size());
    rep.sign_ok = std::abs(rep.psi_at_q) < 1e-10 && rep.max_psi_elsewhere < 0.0;
    return rep;
}

// ---------------------------------------------------------------- Sobolev

struct SobolevResult {
    double ratio = 0.0;
    double numerator = 0.0;   // (int |h|^{2m/(m-2)})^{(m-2)/m}
    double denominator = 0.0; // int |grad h|^2
    double dimension = 0.0;   // real dimension m of the grid
};

/// L^2 Sobolev quotient with the grid's volume element; h must vanish on a two-node boundary collar.
inline SobolevResult sobolev_quotient(const GridFunction& h) {
    const Grid& g = h.grid();
    const double m = 2.0 * g.p() + g.tangential_axes();
    require(m >= 3.0, "sobolev_check: need real dimension >= 3");
    const double scale = 1.0 + h.sup_norm();
    for (std::size_t n = 0; n < g.size(); ++n) {
        const long idx = static_cast<long>(n);
        bool collar = false;
        for (int j = 0; j < g.p(); ++j) collar |= g.ring(idx, j) >= g.factor(j).radial_intervals - 1;
        for (int a = 0; a < g.tangential_axes(); ++a) {
            const auto& t = g.tangential(a);
            const int q = g.local(idx, g.p() + a);
            if (!t.periodic) collar |= q <= 1 || q >= t.nodes - 2;
        }
        if (collar && std::abs(h[n]) > 1e-14 * scale) throw UsageError("sobolev_check: h is not compactly supported");
    }
    const double expo = 2.0 * m / (m - 2.0);
    const auto grad = gradient_norm_sq(h);
    SobolevResult r;
    r.dimension = m;
    double num = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double v = g.volume(static_cast<long>(n));
        num += v * std::pow(std::abs(h[n]), expo);
        r.denominator += v * grad[n];
    }
    r.numerator = std::pow(num, (m - 2.0) / m);
    r.ratio = r.denominator > 0.0 ? r.numerator / r.denominator : 0.0;
    return r;
}

inline SobolevResult sobolev_check(const GridFunction& h, const ConeAngles& angles) {
    check_grid_angles(h.grid(), angles);
    return sobolev_quotient(h);
}

} // namespace conelab
