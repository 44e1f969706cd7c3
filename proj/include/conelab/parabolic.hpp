#pragma once

#include <map>

#include "conelab/elliptic.hpp"
#include "conelab/norms.hpp"

namespace conelab {

using SpaceTimeEvaluator = std::function<double(const ConePoint&, double)>;

struct ParabolicProblem {
    ConeAngles angles;
    Domain domain;
    GridSpec grid;
    double t0 = 0.0;
    double T = 1.0;
    SpaceTimeEvaluator rhs = [](const ConePoint&, double) { return 0.0; };
    Evaluator initial = [](const ConePoint&) { return 0.0; };
    SpaceTimeEvaluator boundary = [](const ConePoint&, double) { return 0.0; };
    MetricField metric; // may depend on t
};

struct HeatConfig {
    int steps = 100;
    double theta = 0.5;
    bool euler_startup = true; // first step fully implicit
    int graded_start = 0;      // first k steps grow linearly (dt_j proportional to j), same total span
    LinearSolveOptions linear;
    std::optional<GridFunction> initial_field; // overrides problem.initial (restarts)
};

struct HeatReport {
    SpaceTimeField field;
    std::vector<char> dirichlet;
    int iterations = 0;
    double worst_step_residual = 0.0;
};

inline std::vector<double> heat_time_levels(double t0, double T, int steps, int graded) {
    require(T > t0, "solve_heat: need T > t0");
    require(steps >= 1, "solve_heat: need at least one step");
    require(graded >= 0 && graded <= steps, "solve_heat: graded_start exceeds the step count");
    const double dt = (T - t0) / steps;
    std::vector<double> t{t0};
    const double c = graded > 0 ? 2.0 * dt / (graded + 1) : 0.0;
    for (int j = 1; j <= steps; ++j) {
        const double step = j <= graded ? c * j : dt;
        t.push_back(j == steps ? T : t.back() + step);
    }
    return t;
}

inline HeatReport solve_heat(const ParabolicProblem& pb, const HeatConfig& cfg = {}) {
    require(cfg.theta >= 0.5 && cfg.theta <= 1.0, "solve_heat: theta must lie in [1/2, 1]");
    auto grid = cfg.initial_field ? cfg.initial_field->grid_ptr() : make_grid(pb.angles, pb.grid);
    const Grid& g = *grid;
    check_grid_angles(g, pb.angles);
    const auto mask = domain_mask(g, pb.domain);
    const auto times = heat_time_levels(pb.t0, pb.T, cfg.steps, cfg.graded_start);
    const std::size_t N = g.size();
    std::vector<ConePoint> pts(N), bpts(N);
    for (std::size_t n = 0; n < N; ++n) {
        pts[n] = g.point(static_cast<long>(n));
        bpts[n] = mask[n] && pb.domain.kind == DomainKind::ConeBall ? project_to_sphere(pts[n], pb.domain.radius) : pts[n];
    }
    auto boundary_at = [&](double t, std::vector<double>& u) {
        for (std::size_t n = 0; n < N; ++n)
            if (mask[n]) u[n] = pb.boundary(bpts[n], t);
    };
    auto rhs_at = [&](double t) {
        std::vector<double> f(N);
        for (std::size_t n = 0; n < N; ++n) f[n] = pb.rhs(pts[n], t);
        return f;
    };

    std::vector<double> u(N);
    if (cfg.initial_field) {
        u = cfg.initial_field->values();
    } else {
        for (std::size_t n = 0; n < N; ++n) u[n] = pb.initial(pts[n]);
        boundary_at(times[0], u);
    }
    for (double v : u) require(std::isfinite(v), "solve_heat: non-finite initial data");

    HeatReport rep;
    rep.dirichlet = mask;
    rep.field.grid = grid;
    rep.field.push(times[0], u);
    Partition part(mask);
    const bool flat = pb.metric.is_flat();
    const std::vector<double> vol = node_volumes(g);
    const SparseMatrix L0 = flat ? assemble_operator(g, pb.metric, 0.0, mask) : SparseMatrix();
    const SparseMatrix K0 = flat ? part.restrict_matrix(L0, &vol) : SparseMatrix();
    std::map<std::pair<double, double>, SparseMatrix> cache; // (dt, theta) -> V/dt - theta K

    std::vector<double> f_old = rhs_at(times[0]);
    for (int step = 1; step < static_cast<int>(times.size()); ++step) {
        const double t_old = times[step - 1], t_new = times[step], dt = t_new - t_old;
        const double th = step == 1 && cfg.euler_startup ? 1.0 : cfg.theta;
        std::vector<double> f_new = rhs_at(t_new);
        std::vector<double> next = u;
        boundary_at(t_new, next);
        Eigen::Map<const Eigen::VectorXd> uo(u.data(), static_cast<long>(N));
        LinearSolveResult res;
        if (flat) {
            // V (u' - u)/dt = theta (K u' + V f') + (1 - theta)(K u + V f) on unknown rows
            const Eigen::VectorXd Lu = L0 * uo;
            Eigen::VectorXd b(part.size());
            const Eigen::VectorXd bnd = part.boundary_action(L0, next, &vol);
            for (long k = 0; k < part.size(); ++k) {
                const long n = part.unknowns[k];
                b[k] = vol[n] * (u[n] / dt + (1.0 - th) * (Lu[n] + f_old[n]) + th * f_new[n]) + th * bnd[k];
            }
            auto it = cache.find({dt, th});
            if (it == cache.end()) {
                SparseMatrix A = -th * K0;
                for (long k = 0; k < part.size(); ++k) A.coeffRef(k, k) += vol[part.unknowns[k]] / dt;
                A.makeCompressed();
                it = cache.emplace(std::pair{dt, th}, std::move(A)).first;
            }
            res = solve_spd(it->second, b, part.gather(u), cfg.linear);
        } else {
            const SparseMatrix Lold = assemble_operator(g, pb.metric, t_old, mask);
            const SparseMatrix Lnew = assemble_operator(g, pb.metric, t_new, mask);
            const Eigen::VectorXd Lu = Lold * uo;
            const Eigen::VectorXd bnd = part.boundary_action(Lnew, next);
            Eigen::VectorXd b(part.size());
            for (long k = 0; k < part.size(); ++k) {
                const long n = part.unknowns[k];
                b[k] = u[n] / dt + (1.0 - th) * (Lu[n] + f_old[n]) + th * f_new[n] + th * bnd[k];
            }
            SparseMatrix A = -th * part.restrict_matrix(Lnew);
            for (long k = 0; k < part.size(); ++k) A.coeffRef(k, k) += 1.0 / dt;
            A.makeCompressed();
            res = solve_general(A, b, part.gather(u), cfg.linear);
        }
        part.scatter(res.x, next);
        rep.iterations += res.iterations;
        rep.worst_step_residual = std::max(rep.worst_step_residual, res.relative_residual);
        u = std::move(next);
        f_old = std::move(f_new);
        rep.field.push(t_new, u);
    }
    return rep;
}

// ---------------------------------------------------------------- helpers

namespace parabolic_detail {

inline std::vector<double> origin_distance(const Grid& g, const ConeAngles& a) {
    std::vector<double> d(g.size());
    const auto o = ConePoint::origin(a);
    for (std::size_t n = 0; n < g.size(); ++n) d[n] = cone_distance(o, g.point(static_cast<long>(n)), a);
    return d;
}

/// du/dt at a level: central differences inside, one-sided at the ends.
inline std::vector<double> time_derivative(const SpaceTimeField& f, std::size_t l) {
    const std::size_t L = f.level_count();
    require(L >= 2, "time derivative: need two levels");
    const std::size_t a = l == 0 ? 0 : l - 1, c = l + 1 == L ? l : l + 1;
    std::vector<double> out(f.grid->size());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = (f.levels[c][n] - f.levels[a][n]) / (f.times[c] - f.times[a]);
    return out;
}

inline bool apex_or_boundary(const Grid& g, long idx) {
    for (int j = 0; j < g.p(); ++j)
        if (g.ring(idx, j) == 0) return true;
    return g.is_boundary(idx);
}

} // namespace parabolic_detail

struct ParabolicMaxPrinciple {
    double lower = 0.0, upper = 0.0, delta = 0.0, worst_violation = 0.0;
    long violations = 0;
    [[nodiscard]] bool ok() const { return violations == 0; }
};

/// Range of u over the parabolic boundary (initial slab plus lateral Dirichlet nodes) against the interior.
inline ParabolicMaxPrinciple check_parabolic_maximum_principle(const HeatReport& rep, double delta = -1.0) {
    const auto& f = rep.field;
    ParabolicMaxPrinciple d;
    d.lower = std::numeric_limits<double>::infinity();
    d.upper = -d.lower;
    for (std::size_t l = 0; l < f.level_count(); ++l)
        for (std::size_t n = 0; n < f.grid->size(); ++n)
            if (l == 0 || rep.dirichlet[n]) {
                d.lower = std::min(d.lower, f.levels[l][n]);
                d.upper = std::max(d.upper, f.levels[l][n]);
            }
    d.delta = delta >= 0.0 ? delta : 1e-7 * std::max({1.0, std::abs(d.lower), std::abs(d.upper)});
    for (std::size_t l = 1; l < f.level_count(); ++l)
        for (std::size_t n = 0; n < f.grid->size(); ++n) {
            if (rep.dirichlet[n]) continue;
            const double ex = std::max(d.lower - f.levels[l][n], f.levels[l][n] - d.upper);
            d.worst_violation = std::max(d.worst_violation, ex);
            if (ex > d.delta) ++d.violations;
        }
    return d;
}

/// int u^2 dV_beta at every level.
inline std::vector<double> l2_mass(const SpaceTimeField& f) {
    const auto vol = node_volumes(*f.grid);
    std::vector<double> out;
    for (const auto& lvl : f.levels) {
        double m = 0.0;
        for (std::size_t n = 0; n < lvl.size(); ++n) m += vol[n] * lvl[n] * lvl[n];
        out.push_back(m);
    }
    return out;
}

// ---------------------------------------------------------------- Li-Yau

struct LiYauRow {
    double t = 0.0;
    double sup_lhs = 0.0;          // sup of |grad u|^2/u^2 - 2 u_t/u over B(0, 2R/3)
    double rhs = 0.0;              // C/R^2 + 2n/t
    double measured_constant = 0.0; // max(0, sup_lhs - 2n/t) R^2
    bool ok = true;
};

struct LiYauReport {
    double R = 0.0, C = 0.0;
    std::vector<LiYauRow> rows;
    [[nodiscard]] bool ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const LiYauRow& r) { return r.ok; });
    }
    [[nodiscard]] double max_constant() const {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.measured_constant);
        return m;
    }
};

inline constexpr double kPositivityFloor = 1e-14;

/// Li-Yau quotient at the levels with t in [t_min, t_max]; u must be positive on B(0, 2R/3).
inline LiYauReport verify_li_yau(const SpaceTimeField& u, const ConeAngles& angles, double R, double t_min, double t_max,
                                 double C = 10.0) {
    check_grid_angles(*u.grid, angles);
    require(R > 0.0, "verify_li_yau: R must be positive");
    const Grid& g = *u.grid;
    const auto dist = parabolic_detail::origin_distance(g, angles);
    LiYauReport rep;
    rep.R = R;
    rep.C = C;
    const double two_n = 2.0 * angles.n();
    for (std::size_t l = 0; l < u.level_count(); ++l) {
        const double t = u.times[l];
        if (t < t_min || t > t_max || t <= 0.0) continue;
        const auto ul = u.at(l);
        const auto grad = gradient_norm_sq(ul);
        const auto ut = parabolic_detail::time_derivative(u, l);
        LiYauRow row{t, -std::numeric_limits<double>::infinity()};
        for (std::size_t n = 0; n < g.size(); ++n) {
            if (dist[n] >= 2.0 * R / 3.0 || g.is_boundary(static_cast<long>(n))) continue;
            if (ul[n] < -kPositivityFloor) throw UsageError("verify_li_yau: u is not positive on the evaluation ball");
            const double v = std::max(ul[n], kPositivityFloor);
            row.sup_lhs = std::max(row.sup_lhs, grad[n] / (v * v) - 2.0 * ut[n] / v);
        }
        row.rhs = C / (R * R) + two_n / t;
        row.measured_constant = std::max(0.0, row.sup_lhs - two_n / t) * R * R;
        row.ok = row.sup_lhs <= row.rhs;
        rep.rows.push_back(row);
    }
    require(!rep.rows.empty(), "verify_li_yau: no time level in the requested window");
    return rep;
}

// ---------------------------------------------------------------- derivative bounds

struct DerivativeBoundRow {
    std::string quantity;
    double power = 1.0; // envelope (1/t + 1/R^2)^power * osc^k
    double t = 0.0;
    double sup = 0.0;
    double envelope = 0.0;
    double measured_constant = 0.0;
};

struct DerivativeBoundReport {
    double R = 0.0;
    double oscillation = 0.0;
    std::vector<DerivativeBoundRow> rows;
    [[nodiscard]] double max_constant(const std::string& q) const {
        double m = 0.0;
        for (const auto& r : rows)
            if (r.quantity == q) m = std::max(m, r.measured_constant);
        return m;
    }
};

/// Sups over B(0, R/2) minus strata of the gradient, second-order and |grad T u| quantities against the
/// (1/t + 1/R^2)^power osc_R u envelopes, at levels with 0 < t < R^2.
inline DerivativeBoundReport verify_heat_derivative_bounds(const SpaceTimeField& u, const ConeAngles& angles, double R) {
    check_grid_angles(*u.grid, angles);
    const Grid& g = *u.grid;
    const auto dist = parabolic_detail::origin_distance(g, angles);
    DerivativeBoundReport rep;
    rep.R = R;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t l = 0; l < u.level_count(); ++l) {
        if (u.times[l] > R * R) continue;
        for (std::size_t n = 0; n < g.size(); ++n)
            if (dist[n] < R) {
                lo = std::min(lo, u.levels[l][n]);
                hi = std::max(hi, u.levels[l][n]);
            }
    }
    rep.oscillation = hi - lo;
    const auto ops = all_t_operators(angles, g.tangential_axes());
    for (std::size_t l = 0; l < u.level_count(); ++l) {
        const double t = u.times[l];
        if (t <= 0.0 || t >= R * R) continue;
        const double w = 1.0 / t + 1.0 / (R * R);
        const auto ul = u.at(l);
        auto sup_of = [&](const std::vector<double>& v, bool sqrt_it) {
            double m = 0.0;
            for (std::size_t n = 0; n < g.size(); ++n)
                if (dist[n] < R / 2.0 && !parabolic_detail::apex_or_boundary(g, static_cast<long>(n)))
                    m = std::max(m, sqrt_it ? std::sqrt(std::max(v[n], 0.0)) : std::abs(v[n]));
            return m;
        };
        auto add = [&](const std::string& q, double power, int osc_power, double sup) {
            const double env = std::pow(w, power) * std::pow(rep.oscillation, osc_power);
            rep.rows.push_back({q, power, t, sup, env, env > 0.0 ? sup / env : 0.0});
        };
        add("gradient_sq", 1.0, 2, sup_of(gradient_norm_sq(ul).values(), false));
        const auto ut = parabolic_detail::time_derivative(u, l);
        add("dt", 1.0, 1, sup_of(ut, false));
        double second = 0.0, third = 0.0;
        for (const auto& op : ops) {
            const auto tu = apply_T(ul, op, angles);
            if (op.kind != TOperator::Kind::ConeTangential) second = std::max(second, sup_of(tu.values(), false));
            if (op.kind == TOperator::Kind::Laplacian ||
                (op.kind == TOperator::Kind::Tangential && op.first.index == op.second.index))
                third = std::max(third, sup_of(gradient_norm_sq(tu).values(), true));
        }
        add("second_order", 1.0, 1, second);
        third = std::max(third, sup_of(gradient_norm_sq(GridFunction(u.grid, ut)).values(), true));
        add("gradient_of_T", 1.5, 1, third);
    }
    return rep;
}

// ---------------------------------------------------------------- Caccioppoli

struct CaccioppoliReport {
    double rho = 0.0, R = 0.0;
    double lhs1 = 0.0, rhs1 = 0.0; // sup_t int_{B_rho} u^2 + iint_{Q_rho} |grad u|^2  vs  (R-rho)^-2 iint u^2 + (R-rho)^2 iint f^2
    double lhs2 = 0.0, rhs2 = 0.0; // sup_t int |grad u|^2 + iint |Hess u|^2  vs  (R-rho)^-2 iint |grad u|^2 + iint (f - f_R)^2
    double f_mean = 0.0;
    [[nodiscard]] double ratio1() const { return rhs1 > 0.0 ? lhs1 / rhs1 : (lhs1 > 0.0 ? INFINITY : 0.0); }
    [[nodiscard]] double ratio2() const { return rhs2 > 0.0 ? lhs2 / rhs2 : (lhs2 > 0.0 ? INFINITY : 0.0); }
};

/// Both energy inequalities by node-volume quadrature in space and trapezoids in time.
inline CaccioppoliReport caccioppoli_check(const SpaceTimeField& u, const SpaceTimeEvaluator& f, const ConeAngles& angles,
                                           double rho, double R) {
    require(rho > 0.0 && rho < R, "caccioppoli_check: need 0 < rho < R");
    check_grid_angles(*u.grid, angles);
    const Grid& g = *u.grid;
    require(u.times.front() <= 0.0 && u.times.back() >= R * R - 1e-12, "caccioppoli_check: field must cover [0, R^2]");
    const auto dist = parabolic_detail::origin_distance(g, angles);
    const auto vol = node_volumes(g);
    std::vector<ConePoint> pts;
    for (std::size_t n = 0; n < g.size(); ++n) pts.push_back(g.point(static_cast<long>(n)));
    CaccioppoliReport rep;
    rep.rho = rho;
    rep.R = R;
    struct Level {
        double u2_rho = 0, u2_R = 0, g2_rho = 0, g2_R = 0, h2_rho = 0, f2_R = 0, f_R = 0, vol_R = 0;
    };
    std::vector<Level> lv;
    std::vector<double> ts;
    for (std::size_t l = 0; l < u.level_count(); ++l) {
        if (u.times[l] > R * R + 1e-12) break;
        const auto ul = u.at(l);
        const auto g2 = gradient_norm_sq(ul);
        const auto h2 = hessian_norm_sq(ul);
        Level e;
        for (std::size_t n = 0; n < g.size(); ++n) {
            if (dist[n] >= R) continue;
            const double v = vol[n], fv = f(pts[n], u.times[l]);
            e.u2_R += v * ul[n] * ul[n];
            e.g2_R += v * g2[n];
            e.f2_R += v * fv * fv;
            e.f_R += v * fv;
            e.vol_R += v;
            if (dist[n] < rho) {
                e.u2_rho += v * ul[n] * ul[n];
                e.g2_rho += v * g2[n];
                e.h2_rho += v * h2[n];
            }
        }
        lv.push_back(e);
        ts.push_back(u.times[l]);
    }
    auto integrate = [&](auto member, double t_end) {
        double acc = 0.0;
        for (std::size_t l = 1; l < ts.size(); ++l) {
            if (ts[l - 1] >= t_end - 1e-15) break;
            const double b = std::min(ts[l], t_end);
            acc += 0.5 * (b - ts[l - 1]) * (lv[l - 1].*member + lv[l].*member);
        }
        return acc;
    };
    const double gap = R - rho;
    // f_R: space-time mean over Q_R; the (f - f_R)^2 integral expands as iint f^2 - f_R^2 |Q_R|
    const double qvol = integrate(&Level::vol_R, R * R);
    rep.f_mean = qvol > 0.0 ? integrate(&Level::f_R, R * R) / qvol : 0.0;
    const double f_dev = std::max(0.0, integrate(&Level::f2_R, R * R) - rep.f_mean * rep.f_mean * qvol);
    double sup_u2 = 0.0, sup_g2 = 0.0;
    for (std::size_t l = 0; l < ts.size(); ++l)
        if (ts[l] <= rho * rho + 1e-12) {
            sup_u2 = std::max(sup_u2, lv[l].u2_rho);
            sup_g2 = std::max(sup_g2, lv[l].g2_rho);
        }
    rep.lhs1 = sup_u2 + integrate(&Level::g2_rho, rho * rho);
    rep.rhs1 = integrate(&Level::u2_R, R * R) / (gap * gap) + gap * gap * integrate(&Level::f2_R, R * R);
    rep.lhs2 = sup_g2 + integrate(&Level::h2_rho, rho * rho);
    rep.rhs2 = integrate(&Level::g2_R, R * R) / (gap * gap) + f_dev;
    return rep;
}

// ---------------------------------------------------------------- time-zero Schauder

struct TimeZeroReport {
    double alpha = 0.0;
    std::vector<std::pair<std::string, HolderReport>> terms; // T outputs and dt on B(0,1/2) x [0, 1/4]
    double data_norm = 0.0;       // sup|f| + [f]_alpha (as supplied)
    double measured_constant = 0.0; // max seminorm / data_norm
    bool finite = true;
    HeatReport solve;
};

/// Solves with a graded start and measures parabolic seminorms of every T u and of du/dt,
/// pairs reaching t = 0 included.
inline TimeZeroReport verify_time_zero_schauder(const ParabolicProblem& pb, double alpha, double f_seminorm,
                                                const HeatConfig& cfg, const PairOptions& opt = {}) {
    require(alpha > 0.0 && alpha < pb.angles.exponent_cap(), "verify_time_zero_schauder: alpha outside (0, cap)");
    TimeZeroReport rep;
    rep.alpha = alpha;
    rep.solve = solve_heat(pb, cfg);
    const auto& f = rep.solve.field;
    const Grid& g = *f.grid;
    const auto dist = parabolic_detail::origin_distance(g, pb.angles);
    std::size_t L = 0;
    while (L < f.level_count() && f.times[L] <= 0.25 + 1e-12) ++L;
    require(L >= 2, "verify_time_zero_schauder: fewer than two levels in [0, 1/4]");
    // restrict to B(0,1/2) minus strata and grid boundary
    PairOptions o = opt;
    o.radius = 0.5;
    o.skip_boundary = true;
    SpaceTimeField window;
    window.grid = f.grid;
    for (std::size_t l = 0; l < L; ++l) window.push(f.times[l], f.levels[l]);
    auto pairs = space_time_pairs(window, pb.angles, o);
    std::erase_if(pairs.pairs, [&](const auto& pq) {
        return parabolic_detail::apex_or_boundary(g, pq.first.first) || parabolic_detail::apex_or_boundary(g, pq.second.first);
    });
    double fsup = 0.0;
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t n = 0; n < g.size(); ++n)
            if (dist[n] < 0.5) fsup = std::max(fsup, std::abs(pb.rhs(g.point(static_cast<long>(n)), f.times[l])));
    rep.data_norm = fsup + f_seminorm;
    auto measure = [&](const std::string& name, const std::vector<std::vector<double>>& levels) {
        auto h = parabolic_holder(levels, window.times, g, pairs, alpha, pb.angles);
        rep.finite = rep.finite && std::isfinite(h.seminorm);
        if (rep.data_norm > 0.0) rep.measured_constant = std::max(rep.measured_constant, h.seminorm / rep.data_norm);
        rep.terms.emplace_back(name, h);
    };
    for (const auto& op : all_t_operators(pb.angles, g.tangential_axes())) {
        std::vector<std::vector<double>> lv;
        for (std::size_t l = 0; l < L; ++l) lv.push_back(apply_T(window.at(l), op, pb.angles).values());
        measure(op.name(), lv);
    }
    std::vector<std::vector<double>> dt;
    for (std::size_t l = 0; l < L; ++l) dt.push_back(parabolic_detail::time_derivative(f, l));
    measure("dt", dt);
    return rep;
}

} // namespace conelab
