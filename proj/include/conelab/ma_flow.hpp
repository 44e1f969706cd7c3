#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "conelab/linear_solve.hpp"
#include "conelab/norms.hpp"
#include "conelab/operators.hpp"
#include "conelab/parabolic.hpp"

namespace conelab {

// Rotationally invariant toy Monge-Ampere flow
//   d_t phi = log prod_d (a_d(t, x) + L_d phi) + f,   a_d = 1 + t chi_d,
// over complex directions d: one per cone factor (L = Delta_j) and one per pair of tangential axes
// (L = D_a D_a + D_b D_b; a leftover axis gives D_a D_a). Boundary nodes follow the same flow
// with the i dd-bar term dropped, so spatially constant potentials are exact solutions.

struct FlowDirection {
    std::string name;
    std::vector<TOperator> parts;
};

inline std::vector<FlowDirection> flow_directions(const Grid& g) {
    std::vector<FlowDirection> out;
    for (int j = 0; j < g.p(); ++j) out.push_back({"cone" + std::to_string(j + 1), {TOperator::laplacian(j)}});
    for (int a = 0; a < g.tangential_axes(); a += 2) {
        FlowDirection d{"tangential" + std::to_string(a / 2 + 1), {TOperator::tangential(a, a)}};
        if (a + 1 < g.tangential_axes()) d.parts.push_back(TOperator::tangential(a + 1, a + 1));
        out.push_back(std::move(d));
    }
    return out;
}

struct FlowStepInfo {
    double t = 0.0, dt = 0.0;
    int newton_iterations = 0;
    int damping_halvings = 0; // summed over the Newton iterations
    int rejections = 0;       // dt halvings after a positivity breach
    double residual = 0.0;    // final max |Psi| * dt
};

struct FlowConfig {
    double newton_tol = 1e-12; // on max |Psi| * dt
    int max_newton = 30;
    int max_halvings = 8;
    double damping = 1.0; // first trial length of every Newton update
    double C0 = 10.0;     // metric sandwich [1/C0, C0] per direction
    int max_rejections = 10;
    LinearSolveOptions linear{1e-13, 20000, 500};
};

struct FlowState {
    ConeAngles angles;
    std::shared_ptr<const Grid> grid;
    std::vector<FlowDirection> directions;
    std::vector<SparseMatrix> L;           // per direction, interior rows only
    std::vector<std::vector<double>> chi;  // per direction, node values of the reference form
    SpaceTimeEvaluator f;
    std::vector<char> boundary;
    SpaceTimeField phi;
    std::vector<FlowStepInfo> steps;

    [[nodiscard]] double time() const { return phi.times.back(); }
    [[nodiscard]] const std::vector<double>& current() const { return phi.levels.back(); }
};

/// chi: one evaluator per direction (empty: chi = 0); f(x, t) forcing. phi(., 0) = 0.
inline FlowState make_flow_state(const ConeAngles& angles, const std::shared_ptr<const Grid>& grid,
                                 const std::vector<Evaluator>& chi, SpaceTimeEvaluator f) {
    const Grid& g = *grid;
    check_grid_angles(g, angles);
    FlowState s{angles, grid, flow_directions(g)};
    require(chi.empty() || chi.size() == s.directions.size(), "make_flow_state: one chi per complex direction");
    s.boundary = boundary_mask(g);
    s.f = f ? std::move(f) : SpaceTimeEvaluator([](const ConePoint&, double) { return 0.0; });
    Row row;
    for (const auto& d : s.directions) {
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t n = 0; n < g.size(); ++n) {
            if (s.boundary[n]) continue;
            row.clear();
            for (const auto& t : d.parts) stencil::t_operator(g, static_cast<long>(n), t, 1.0, row);
            for (const auto& [c, w] : row) trips.emplace_back(static_cast<long>(n), c, w);
        }
        SparseMatrix A(static_cast<long>(g.size()), static_cast<long>(g.size()));
        A.setFromTriplets(trips.begin(), trips.end());
        A.makeCompressed();
        s.L.push_back(std::move(A));
    }
    for (std::size_t k = 0; k < s.directions.size(); ++k) {
        std::vector<double> c(g.size(), 0.0);
        if (!chi.empty() && chi[k])
            for (std::size_t n = 0; n < g.size(); ++n) c[n] = chi[k](g.point(static_cast<long>(n)));
        s.chi.push_back(std::move(c));
    }
    s.phi.grid = grid;
    s.phi.push(0.0, std::vector<double>(g.size(), 0.0));
    return s;
}

namespace flow_detail {

inline Eigen::VectorXd as_vector(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

/// a_d + L_d phi per direction (a_d alone on boundary rows).
inline std::vector<Eigen::VectorXd> factors(const FlowState& s, const Eigen::VectorXd& phi, double t) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t d = 0; d < s.L.size(); ++d) {
        Eigen::VectorXd v = s.L[d] * phi;
        for (long n = 0; n < v.size(); ++n) v[n] += 1.0 + t * s.chi[d][n];
        out.push_back(std::move(v));
    }
    return out;
}

inline std::vector<double> forcing(const FlowState& s, double t) {
    std::vector<double> f(s.grid->size());
    for (std::size_t n = 0; n < f.size(); ++n) f[n] = s.f(s.grid->point(static_cast<long>(n)), t);
    return f;
}

/// Implicit-Euler residual Psi(phi) = (phi - phi_old)/dt - sum_d log(a_d + L_d phi) - f; +inf where a factor is not positive.
inline Eigen::VectorXd residual(const FlowState& s, const Eigen::VectorXd& phi, const Eigen::VectorXd& old, double t, double dt,
                                const std::vector<double>& f) {
    const auto fac = factors(s, phi, t);
    Eigen::VectorXd r = (phi - old) / dt;
    for (long n = 0; n < r.size(); ++n) {
        double logdet = 0.0;
        for (const auto& v : fac) logdet += v[n] > 0.0 ? std::log(v[n]) : -INFINITY;
        r[n] -= logdet + f[n];
    }
    return r;
}

/// D Psi_phi = I/dt - sum_d diag(1/(a_d + L_d phi)) L_d: the implicit step of d_t v - Delta_{omega_phi} v.
inline SparseMatrix jacobian(const FlowState& s, const Eigen::VectorXd& phi, double t, double dt) {
    const auto fac = factors(s, phi, t);
    const long N = phi.size();
    SparseMatrix J(N, N);
    J.setIdentity();
    J *= 1.0 / dt;
    for (std::size_t d = 0; d < s.L.size(); ++d) {
        Eigen::VectorXd w = fac[d].cwiseInverse();
        J -= SparseMatrix(w.asDiagonal() * s.L[d]);
    }
    J.makeCompressed();
    return J;
}

inline double sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace flow_detail

/// Per-direction metric factors a_d + L_d phi at a stored level.
inline std::vector<std::vector<double>> metric_factors(const FlowState& s, std::size_t level) {
    const auto fac = flow_detail::factors(s, flow_detail::as_vector(s.phi.levels.at(level)), s.phi.times.at(level));
    std::vector<std::vector<double>> out;
    for (const auto& v : fac) out.emplace_back(v.data(), v.data() + v.size());
    return out;
}

/// Worst sandwich violation: max over interior nodes and directions of max(C0^{-1} - factor, factor - C0), <= 0 when held.
inline double sandwich_defect(const FlowState& s, std::size_t level, double C0) {
    double worst = -INFINITY;
    for (const auto& v : metric_factors(s, level))
        for (std::size_t n = 0; n < v.size(); ++n) worst = std::max(worst, std::max(1.0 / C0 - v[n], v[n] - C0));
    return worst;
}

/// One implicit step of size dt (halved on a positivity breach). Newton corrections solve the linear
/// parabolic step; each update is halved while the residual does not decrease.
inline FlowState step_ma_flow(FlowState s, double dt, const FlowConfig& cfg = {}) {
    require(dt > 0.0 && std::isfinite(dt), "step_ma_flow: dt must be positive");
    const Eigen::VectorXd old = flow_detail::as_vector(s.current());
    FlowStepInfo info;
    for (int attempt = 0; attempt <= cfg.max_rejections; ++attempt, dt *= 0.5) {
        const double t = s.time() + dt;
        const auto f = flow_detail::forcing(s, t);
        Eigen::VectorXd phi = old;
        Eigen::VectorXd r = flow_detail::residual(s, phi, old, t, dt, f);
        if (!std::isfinite(flow_detail::sup(r))) {
            ++info.rejections; // the reference form itself is not positive at t
            continue;
        }
        std::vector<double> history{flow_detail::sup(r) * dt};
        int it = 0;
        while (flow_detail::sup(r) * dt > cfg.newton_tol) {
            if (++it > cfg.max_newton) throw SolverError("step_ma_flow: Newton did not converge", history);
            const SparseMatrix J = flow_detail::jacobian(s, phi, t, dt);
            const auto lin = solve_general(J, -r, Eigen::VectorXd::Zero(r.size()), cfg.linear);
            double lambda = cfg.damping;
            Eigen::VectorXd trial, rt;
            int h = 0;
            for (;; ++h, lambda *= 0.5) {
                trial = phi + lambda * lin.x;
                rt = flow_detail::residual(s, trial, old, t, dt, f);
                const double nt = flow_detail::sup(rt);
                if (std::isfinite(nt) && (nt < flow_detail::sup(r) || nt * dt <= cfg.newton_tol)) break;
                if (h == cfg.max_halvings) throw SolverError("step_ma_flow: damping exhausted", history);
            }
            info.damping_halvings += h;
            phi = std::move(trial);
            r = std::move(rt);
            history.push_back(flow_detail::sup(r) * dt);
        }
        FlowState next = s;
        next.phi.push(t, std::vector<double>(phi.data(), phi.data() + phi.size()));
        if (sandwich_defect(next, next.phi.level_count() - 1, cfg.C0) > 0.0) {
            ++info.rejections;
            continue;
        }
        info.t = t;
        info.dt = dt;
        info.newton_iterations = it;
        info.residual = history.back();
        next.steps.push_back(info);
        return next;
    }
    throw SolverError("step_ma_flow: positivity breach persists after " + std::to_string(cfg.max_rejections) + " dt halvings");
}

/// Steps of nominal size T/steps until T (shorter steps where the stepper halved dt).
inline FlowState run_ma_flow(FlowState s, double T, int steps, const FlowConfig& cfg = {}) {
    require(steps >= 1 && T > s.time(), "run_ma_flow: need T beyond the current time and steps >= 1");
    const double dt = (T - s.time()) / steps;
    while (s.time() < T - 1e-12 * T) s = step_ma_flow(std::move(s), std::min(dt, T - s.time()), cfg);
    return s;
}

/// Normalized Ricci potential log(omega_t^n / omega_0^n) = sum_d log(a_d + L_d phi) at every level.
inline SpaceTimeField ricci_potential(const FlowState& s) {
    SpaceTimeField out;
    out.grid = s.grid;
    for (std::size_t l = 0; l < s.phi.level_count(); ++l) {
        const auto fac = metric_factors(s, l);
        std::vector<double> v(s.grid->size(), 0.0);
        for (const auto& d : fac)
            for (std::size_t n = 0; n < v.size(); ++n) v[n] += std::log(d[n]);
        out.push(s.phi.times[l], std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------- linearization check

struct LinearizationCheck {
    double h = 0.0;
    double sup_analytic = 0.0;
    double sup_error = 0.0;
    [[nodiscard]] double relative_error() const { return sup_error / std::max(sup_analytic, 1e-300); }
};

/// Central difference (Psi(phi + h v) - Psi(phi - h v)) / 2h against D Psi_phi v on the slab [t, t + dt].
inline LinearizationCheck linearization_check(const FlowState& s, const std::vector<double>& phi, const std::vector<double>& v,
                                              double dt, double h = 1e-5) {
    require(phi.size() == s.grid->size() && v.size() == phi.size(), "linearization_check: size mismatch");
    const Eigen::VectorXd old = flow_detail::as_vector(s.current()), p = flow_detail::as_vector(phi), dv = flow_detail::as_vector(v);
    const double t = s.time() + dt;
    const auto f = flow_detail::forcing(s, t);
    const Eigen::VectorXd fd =
        (flow_detail::residual(s, p + h * dv, old, t, dt, f) - flow_detail::residual(s, p - h * dv, old, t, dt, f)) / (2.0 * h);
    const Eigen::VectorXd an = flow_detail::jacobian(s, p, t, dt) * dv;
    LinearizationCheck c{h, flow_detail::sup(an), flow_detail::sup(fd - an)};
    if (!std::isfinite(c.sup_error)) throw UsageError("linearization_check: phi +- h v leaves the positive cone");
    return c;
}

// ---------------------------------------------------------------- KRF toy

struct KrfSpec {
    ConeAngles angles{{0.75}, 1};
    GridSpec grid;
    std::vector<Evaluator> chi; // per direction; empty: chi = 0
    SpaceTimeEvaluator f;
    double T = 0.1;
    int steps = 20;
    double alpha = 0.3;
    double drift_window = 0.05; // linear-response fit over t <= window
    FlowConfig flow;
};

struct KrfReport {
    FlowState state;
    SpaceTimeField ricci;
    HolderReport ricci_holder;
    double ricci_sup = 0.0;
    double T_requested = 0.0, T_reached = 0.0;
    bool shortened = false;
    std::vector<double> drift_slopes; // per direction: slope of the mean interior metric factor against t
};

/// Builds omega-hat_t = omega_0 + t chi, flows to T (or to the last time at which every a_d stays in
/// the sandwich), and reports the Ricci potential with its parabolic Hoelder seminorm.
inline KrfReport run_krf_toy(const KrfSpec& spec) {
    require(spec.T > 0.0 && spec.steps >= 1, "run_krf_toy: need T > 0 and steps >= 1");
    KrfReport rep{make_flow_state(spec.angles, make_grid(spec.angles, spec.grid), spec.chi, spec.f)};
    rep.T_requested = spec.T;
    // omega-hat_t itself must stay positive: a_d = 1 + t chi_d >= 1/C0
    double T = spec.T;
    for (const auto& c : rep.state.chi)
        for (double x : c) {
            if (x < 0.0) T = std::min(T, (1.0 / spec.flow.C0 - 1.0) / x * 0.999);
            if (x > 0.0) T = std::min(T, (spec.flow.C0 - 1.0) / x * 0.999);
        }
    rep.shortened = T < spec.T;
    const int steps = std::max(1, static_cast<int>(std::ceil(spec.steps * T / spec.T)));
    rep.state = run_ma_flow(std::move(rep.state), T, steps, spec.flow);
    rep.T_reached = rep.state.time();
    rep.ricci = ricci_potential(rep.state);
    for (const auto& l : rep.ricci.levels)
        for (double v : l) rep.ricci_sup = std::max(rep.ricci_sup, std::abs(v));
    PairOptions po;
    po.skip_boundary = true;
    rep.ricci_holder = parabolic_holder(rep.ricci, spec.alpha, spec.angles, po);

    const Grid& g = *rep.state.grid;
    for (std::size_t d = 0; d < rep.state.directions.size(); ++d) {
        std::vector<double> ts, ms;
        for (std::size_t l = 0; l < rep.state.phi.level_count(); ++l) {
            if (rep.state.phi.times[l] > spec.drift_window * (1.0 + 1e-12)) break;
            const auto fac = metric_factors(rep.state, l)[d];
            double m = 0.0, w = 0.0;
            for (std::size_t n = 0; n < g.size(); ++n)
                if (!rep.state.boundary[n]) {
                    m += g.volume(static_cast<long>(n)) * fac[n];
                    w += g.volume(static_cast<long>(n));
                }
            ts.push_back(rep.state.phi.times[l]);
            ms.push_back(m / w);
        }
        double mt = 0.0, mm = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            mt += ts[i] / ts.size();
            mm += ms[i] / ts.size();
        }
        double stt = 0.0, stm = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            stt += (ts[i] - mt) * (ts[i] - mt);
            stm += (ts[i] - mt) * (ms[i] - mm);
        }
        rep.drift_slopes.push_back(stt > 0.0 ? stm / stt : std::numeric_limits<double>::quiet_NaN());
    }
    return rep;
}

// ---------------------------------------------------------------- short-time horizon

struct HorizonRow {
    double T = 0.0;
    double norm = 0.0; // surrogate C^{2+alpha,(2+alpha)/2} norm of phi on [0, T]
    bool inside = false;
};

struct HorizonReport {
    double T = 0.0;
    double epsilon = 0.0;
    std::vector<HorizonRow> rows; // dyadic candidates, increasing T
};

struct HorizonConfig {
    double T_max = 0.2;
    int steps = 32;  // steps to T_max; candidates T_max / 2^j down to one step
    double alpha = 0.3;
    FlowConfig flow;
};

/// sup|phi| + sup|phi_t| + sum_d sup|L_d phi| + [phi_t]_alpha + sum_d [L_d phi]_alpha over the stored levels up to `levels`.
inline double flow_surrogate_norm(const FlowState& s, std::size_t levels, double alpha) {
    require(levels >= 2 && levels <= s.phi.level_count(), "flow_surrogate_norm: need at least two levels");
    SpaceTimeField phi{s.grid}, phit{s.grid};
    std::vector<SpaceTimeField> Ld(s.L.size(), SpaceTimeField{s.grid});
    double norm = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
        const auto& v = s.phi.levels[l];
        phi.push(s.phi.times[l], v);
        const Eigen::VectorXd pv = flow_detail::as_vector(v);
        for (std::size_t d = 0; d < s.L.size(); ++d) {
            Eigen::VectorXd w = s.L[d] * pv;
            Ld[d].push(s.phi.times[l], std::vector<double>(w.data(), w.data() + w.size()));
        }
    }
    for (std::size_t l = 1; l < levels; ++l) phit.push(s.phi.times[l], parabolic_detail::time_derivative(phi, l));
    auto sup = [](const SpaceTimeField& f) {
        double m = 0.0;
        for (const auto& l : f.levels)
            for (double v : l) m = std::max(m, std::abs(v));
        return m;
    };
    PairOptions po;
    po.skip_boundary = true;
    norm = sup(phi) + sup(phit);
    if (phit.level_count() >= 2) norm += parabolic_holder(phit, alpha, s.angles, po).seminorm;
    for (const auto& f : Ld) norm += sup(f) + parabolic_holder(f, alpha, s.angles, po).seminorm;
    return norm;
}

/// Largest dyadic T = T_max / 2^j such that every candidate up to T keeps the trajectory in the eps-ball.
inline HorizonReport find_short_time_horizon(const FlowState& initial, double epsilon, const HorizonConfig& cfg = {}) {
    require(epsilon > 0.0, "find_short_time_horizon: epsilon must be positive");
    require(cfg.steps >= 1 && (cfg.steps & (cfg.steps - 1)) == 0, "find_short_time_horizon: steps must be a power of two");
    const auto s = run_ma_flow(initial, initial.time() + cfg.T_max, cfg.steps, cfg.flow);
    require(s.phi.level_count() == static_cast<std::size_t>(cfg.steps) + 1, "find_short_time_horizon: the stepper halved dt; lower T_max");
    HorizonReport rep;
    rep.epsilon = epsilon;
    bool inside = true;
    for (int m = 1; m <= cfg.steps; m *= 2) {
        HorizonRow row{s.phi.times[m] - initial.time(), flow_surrogate_norm(s, static_cast<std::size_t>(m) + 1, cfg.alpha)};
        inside = inside && row.norm <= epsilon;
        row.inside = inside;
        if (inside) rep.T = row.T;
        rep.rows.push_back(row);
    }
    if (rep.T == 0.0) throw SolverError("find_short_time_horizon: no admissible T at the minimum step");
    return rep;
}

} // namespace conelab
