#pragma once

// Command drivers behind the CLI. Each returns a JSON result block plus the files to write, held
// in memory so determinism can be checked byte for byte without touching the disk.

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "conelab/config.hpp"
#include "conelab/ma_flow.hpp"
#include "conelab/schauder_lab.hpp"

namespace conelab {

inline constexpr const char* kConelabVersion = "0.1.0";

struct RunOutput {
    nlohmann::json results;
    std::map<std::string, std::string> files; // name -> bytes, written under the output directory
};

inline nlohmann::json library_versions() {
    return {{"conelab", kConelabVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                  "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}};
}

/// Sub-seed for a named sampler: splitmix64 of the run seed mixed with the name.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = seed ^ 0x9E3779B97F4A7C15ull;
    for (unsigned char c : name) h = (h ^ c) * 0x100000001B3ull;
    h += 0x9E3779B97F4A7C15ull;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    return h ^ (h >> 31);
}

namespace exp_detail {

inline std::string csv_text(const std::string& s) {
    std::string out = s;
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

inline std::ostringstream csv_stream() {
    std::ostringstream os;
    os << std::setprecision(17);
    return os;
}

inline std::string nodal_csv(const GridFunction& u) {
    const Grid& g = u.grid();
    auto os = csv_stream();
    os << "node";
    for (int j = 0; j < g.p(); ++j) os << ",r" << j + 1 << ",theta" << j + 1;
    for (int a = 0; a < g.tangential_axes(); ++a) os << ",s" << a + 1;
    os << ",u\n";
    for (std::size_t n = 0; n < g.size(); ++n) {
        const auto x = g.point(static_cast<long>(n));
        os << n;
        for (int j = 0; j < g.p(); ++j) os << ',' << x.r(j) << ',' << x.theta(j);
        for (double s : x.tangential()) os << ',' << s;
        os << ',' << u[n] << '\n';
    }
    return os.str();
}

inline std::string field_bytes(const GridFunction& u) {
    std::ostringstream os(std::ios::binary);
    write_field(os, u);
    return os.str();
}

inline std::string space_time_bytes(const SpaceTimeField& f) {
    std::ostringstream os(std::ios::binary);
    write_space_time(os, f);
    return os.str();
}

inline double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline std::string betas_key(const std::vector<double>& b) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t j = 0; j < b.size(); ++j) os << (j ? ";" : "") << b[j];
    return os.str();
}

} // namespace exp_detail

// ---------------------------------------------------------------- solve-elliptic

inline EllipticProblem elliptic_problem(const ExperimentConfig& c) {
    EllipticProblem pb{c.angles()};
    pb.domain = c.domain_spec();
    pb.grid = c.grid_spec();
    pb.rhs = at_time(make_field(c.rhs, pb.angles));
    pb.boundary = at_time(make_field(c.boundary, pb.angles));
    return pb;
}

inline RunOutput run_solve_elliptic(const ExperimentConfig& c) {
    RunOutput out;
    const auto pb = elliptic_problem(c);
    SolveConfig sc;
    sc.linear.tol = c.linear_tol;
    sc.consistency_tol = c.residual_target;
    const auto rep = solve_dirichlet(pb, sc);
    auto& r = out.results;
    r["unknowns"] = std::count(rep.dirichlet.begin(), rep.dirichlet.end(), 0);
    r["nodes"] = rep.solution.size();
    r["residual"] = rep.consistency_residual;
    r["krylov_residual"] = rep.residual;
    r["iterations"] = rep.iterations;
    r["sup_u"] = rep.solution.sup_norm();
    if (c.rhs == "zero") {
        const auto d = check_maximum_principle(rep);
        r["maximum_principle"] = {{"violations", d.violations}, {"worst_violation", d.worst_violation}, {"delta", d.delta}};
    }
    out.files["solution.field"] = exp_detail::field_bytes(rep.solution);
    out.files["solution.csv"] = exp_detail::nodal_csv(rep.solution);

    if (c.oracle) {
        LinearSolveOptions lo;
        lo.tol = c.linear_tol;
        const auto ladder = solve_via_epsilon_ladder(pb, c.eps_schedule, CartesianSpec{c.oracle_nodes}, lo);
        const auto& cart = ladder.back().solution;
        nlohmann::json o;
        o["eps"] = ladder.back().eps;
        o["relative_sup_difference"] = relative_sup_difference(rep.solution, cart);
        for (const auto& s : ladder) o["gaps"].push_back(std::isnan(s.gap_to_previous) ? nlohmann::json() : nlohmann::json(s.gap_to_previous));
        r["oracle"] = o;
        auto os = exp_detail::csv_stream();
        os << "node,u_eps,u_cone\n";
        const auto& g = *cart.grid;
        for (std::size_t n = 0; n < g.size(); ++n) {
            if (!g.inside(static_cast<long>(n))) continue;
            os << n << ',' << cart.values[n] << ',' << rep.solution.interpolate(g.point(static_cast<long>(n))) << '\n';
        }
        out.files["oracle.csv"] = os.str();
    }

    if (c.max_principle_trials > 0) {
        std::mt19937_64 rng(derive_seed(c.seed, "max_principle"));
        std::normal_distribution<double> nd;
        long violations = 0;
        double worst = 0.0;
        for (int trial = 0; trial < c.max_principle_trials; ++trial) {
            double k[6];
            for (double& v : k) v = nd(rng);
            EllipticProblem t = pb;
            t.rhs = [](const ConePoint&) { return 0.0; };
            t.boundary = [k](const ConePoint& x) {
                const double s = x.tangential().empty() ? 0.0 : x.tangential()[0];
                return k[0] + k[1] * x.r(0) * std::cos(x.theta(0)) + k[2] * std::sin(2 * x.theta(0) + k[3]) + k[4] * s * s +
                       k[5] * std::cos(5 * s);
            };
            const auto d = check_maximum_principle(solve_dirichlet(t, sc));
            violations += d.violations;
            worst = std::max(worst, d.worst_violation);
        }
        r["max_principle_trials"] = {{"trials", c.max_principle_trials}, {"violations", violations}, {"worst_violation", worst}};
    }
    return out;
}

// ---------------------------------------------------------------- solve-heat

inline RunOutput run_solve_heat(const ExperimentConfig& c) {
    RunOutput out;
    const auto a = c.angles();
    ParabolicProblem pb{a};
    pb.domain = c.domain_spec();
    pb.grid = c.grid_spec();
    pb.T = c.heat_T;
    pb.rhs = make_field(c.rhs, a);
    pb.initial = at_time(make_field(c.initial, a));
    pb.boundary = make_field(c.boundary, a);
    HeatConfig hc;
    hc.steps = c.grid.time_steps;
    hc.theta = c.theta;
    hc.linear.tol = c.linear_tol;
    const auto rep = solve_heat(pb, hc);
    const auto mass = l2_mass(rep.field);
    auto& r = out.results;
    r["levels"] = rep.field.level_count();
    r["iterations"] = rep.iterations;
    r["worst_step_residual"] = rep.worst_step_residual;
    r["final_sup"] = exp_detail::sup_abs(rep.field.levels.back());
    if (mass.front() > 0.0 && mass.back() > 0.0)
        r["l2_decay_rate"] = -std::log(mass.back() / mass.front()) / (2.0 * (rep.field.times.back() - rep.field.times.front()));
    if (c.rhs == "zero") {
        const auto d = check_parabolic_maximum_principle(rep);
        r["maximum_principle"] = {{"violations", d.violations}, {"worst_violation", d.worst_violation}, {"delta", d.delta}};
    }
    auto os = exp_detail::csv_stream();
    os << "level,t,l2_mass,sup_abs\n";
    for (std::size_t l = 0; l < rep.field.level_count(); ++l)
        os << l << ',' << rep.field.times[l] << ',' << mass[l] << ',' << exp_detail::sup_abs(rep.field.levels[l]) << '\n';
    out.files["heat.csv"] = os.str();
    out.files["trajectory.stf"] = exp_detail::space_time_bytes(rep.field);
    return out;
}

// ---------------------------------------------------------------- verify-schauder

inline std::vector<ScanCsvRow> schauder_rows(const ExperimentConfig& c, const ConeAngles& a, std::uint64_t seed, nlohmann::json& r) {
    std::vector<ScanCsvRow> rows;
    for (double alpha : c.alphas) {
        SchauderProblem pb{a, alpha};
        pb.rhs = at_time(make_field(c.rhs, a));
        pb.boundary = at_time(make_field(c.boundary, a));
        pb.grid = c.grid_spec();
        SchauderConfig sc;
        sc.linear.tol = c.linear_tol;
        const auto t = measure_schauder(pb, sc);
        r["alphas"].push_back({{"alpha", alpha},
                               {"cap", t.cap},
                               {"admissible", t.admissible},
                               {"ratio", t.ratio},
                               {"numerator", t.numerator},
                               {"denominator", t.denominator},
                               {"solve_residual", t.solve_residual}});
        const auto more = csv_rows(t, a, seed);
        rows.insert(rows.end(), more.begin(), more.end());
    }
    return rows;
}

inline RunOutput run_verify_schauder(const ExperimentConfig& c) {
    RunOutput out;
    const auto a = c.angles();
    auto rows = schauder_rows(c, a, c.seed, out.results);
    const auto w = sharpness_witness(a);
    for (const auto& row : w.rows)
        out.results["witness"].push_back({{"field", row.field}, {"op", row.op}, {"along", row.along}, {"expected", row.expected},
                                          {"fitted", row.fit.alpha}});
    if (!w.rows.empty()) out.results["witness_worst_error"] = w.worst_error();
    const auto more = csv_rows(w, a);
    rows.insert(rows.end(), more.begin(), more.end());
    std::ostringstream os;
    write_scan_csv(os, rows);
    out.files["schauder.csv"] = os.str();
    return out;
}

// ---------------------------------------------------------------- flow

inline FlowState flow_initial_state(const ExperimentConfig& c) {
    const auto a = c.angles();
    std::vector<Evaluator> chi;
    for (const auto& s : c.chi) chi.push_back(at_time(make_field(s, a)));
    return make_flow_state(a, make_grid(a, c.grid_spec()), chi, make_field(c.rhs, a));
}

inline RunOutput run_flow(const ExperimentConfig& c) {
    RunOutput out;
    FlowConfig fc;
    fc.newton_tol = c.newton_tol;
    fc.linear.tol = std::min(fc.linear.tol, c.linear_tol);
    const auto initial = flow_initial_state(c);
    const auto s = run_ma_flow(initial, c.flow_T, c.flow_steps, fc);
    auto& r = out.results;
    double drift = 0.0;
    for (const auto& l : s.phi.levels) drift = std::max(drift, exp_detail::sup_abs(l));
    r["T_reached"] = s.time();
    r["steps"] = s.steps.size();
    r["sup_phi"] = drift; // for f = 0 and chi = 0 this is the fixed-point drift
    int newton = 0, rejections = 0;
    for (const auto& st : s.steps) {
        newton += st.newton_iterations;
        rejections += st.rejections;
    }
    r["newton_iterations"] = newton;
    r["rejections"] = rejections;
    if (c.linearization_check) {
        std::mt19937_64 rng(derive_seed(c.seed, "linearization"));
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const double k1 = U(rng), k2 = U(rng), k3 = U(rng);
        const Grid& g = *s.grid;
        std::vector<double> v(g.size());
        for (std::size_t n = 0; n < g.size(); ++n) {
            const auto x = g.point(static_cast<long>(n));
            const double sv = x.tangential().empty() ? 0.0 : x.tangential()[0];
            v[n] = k1 * (1.0 - x.r(0) * x.r(0)) + k2 * x.r(0) * x.r(0) * sv + k3 * std::sin(std::numbers::pi * sv);
        }
        const double dt = c.flow_T / c.flow_steps;
        const auto chk = linearization_check(s, s.current(), v, dt);
        r["linearization"] = {{"h", chk.h}, {"relative_error", chk.relative_error()}};
    }
    if (c.horizon_epsilon > 0.0) {
        HorizonConfig hc;
        hc.T_max = c.flow_T;
        hc.steps = 1;
        while (hc.steps * 2 <= c.flow_steps) hc.steps *= 2;
        hc.alpha = c.alphas.front();
        hc.flow = fc;
        const auto h = find_short_time_horizon(initial, c.horizon_epsilon, hc);
        nlohmann::json rows;
        for (const auto& row : h.rows) rows.push_back({{"T", row.T}, {"norm", row.norm}, {"inside", row.inside}});
        r["horizon"] = {{"T", h.T}, {"epsilon", h.epsilon}, {"rows", rows}};
    }
    auto os = exp_detail::csv_stream();
    os << "step,t,dt,newton_iterations,rejections,residual,sup_phi,sandwich_defect\n";
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const auto& st = s.steps[k];
        os << k + 1 << ',' << st.t << ',' << st.dt << ',' << st.newton_iterations << ',' << st.rejections << ',' << st.residual << ','
           << exp_detail::sup_abs(s.phi.levels[k + 1]) << ',' << sandwich_defect(s, k + 1, fc.C0) << '\n';
    }
    out.files["flow.csv"] = os.str();
    out.files["trajectory.stf"] = exp_detail::space_time_bytes(s.phi);
    return out;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
    std::string key;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string message;
    std::vector<std::string> lines; // CSV payload rows for this tuple
};

inline std::string sweep_header(const std::string& analysis) {
    return analysis == "cap" ? "betas,cap,fitted_cap,abs_error,fit_residual,seed,status,message"
                             : "betas,alpha,operator,fitted_exponent,ratio,residual,seed,status,message";
}

inline SweepRow sweep_tuple(const ExperimentConfig& c, const std::vector<double>& betas) {
    SweepRow row;
    row.key = exp_detail::betas_key(betas);
    row.seed = derive_seed(c.seed, row.key);
    try {
        const ConeAngles a(betas, c.n);
        if (c.sweep_analysis == "cap") {
            const auto w = sharpness_witness(a);
            require(!w.rows.empty(), "no witness for this dimension (need p >= 2 or a tangential axis)");
            double fitted = INFINITY, residual = 0.0;
            for (const auto& r : w.rows) {
                fitted = std::min(fitted, r.fit.alpha);
                residual = std::max(residual, r.fit.residual);
            }
            const double bmax = *std::max_element(betas.begin(), betas.end());
            const double cap = std::min(1.0 / bmax - 1.0, 1.0);
            fitted = std::min(fitted, 1.0);
            auto os = exp_detail::csv_stream();
            os << row.key << ',' << cap << ',' << fitted << ',' << std::abs(fitted - cap) << ',' << residual << ',' << row.seed << ",ok,";
            row.lines.push_back(os.str());
        } else {
            nlohmann::json ignored;
            for (const auto& r : schauder_rows(c, a, row.seed, ignored)) {
                auto os = exp_detail::csv_stream();
                os << row.key << ',' << r.alpha << ',' << r.op << ',' << r.fitted_exponent << ',' << r.ratio << ',' << r.residual << ','
                   << row.seed << ",ok,";
                row.lines.push_back(os.str());
            }
        }
    } catch (const std::exception& e) {
        row.ok = false;
        row.message = exp_detail::csv_text(e.what());
        row.lines.clear();
        const int blanks = c.sweep_analysis == "cap" ? 4 : 5;
        std::string line = row.key;
        for (int k = 0; k < blanks; ++k) line += ',';
        line += ',' + std::to_string(row.seed) + ",failed," + row.message;
        row.lines.push_back(line);
    }
    return row;
}

/// Worker pool over the beta tuples; workers share only the read-only config and a job counter.
/// Rows are merged by sorted tuple key, so the table does not depend on scheduling or thread count.
inline RunOutput run_sweep(const ExperimentConfig& c) {
    RunOutput out;
    const auto& jobs = c.sweep_betas;
    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) rows[k] = sweep_tuple(c, jobs[k]);
    };
    const int nt = std::max(1, std::min<int>(c.threads, static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) { return x.key < y.key; });

    std::string csv = sweep_header(c.sweep_analysis) + "\n";
    int failed = 0;
    for (const auto& r : rows) {
        for (const auto& l : r.lines) csv += l + "\n";
        failed += r.ok ? 0 : 1;
        nlohmann::json j{{"betas", r.key}, {"status", r.ok ? "ok" : "failed"}, {"seed", r.seed}};
        if (!r.ok) j["message"] = r.message;
        out.results["tuples"].push_back(j);
    }
    out.results["failed"] = failed;
    out.results["rows"] = std::count(csv.begin(), csv.end(), '\n') - 1;
    out.files["sweep.csv"] = csv;
    return out;
}

// ---------------------------------------------------------------- dispatch

inline RunOutput run_experiment(const ExperimentConfig& c) {
    if (c.command == "solve-elliptic") return run_solve_elliptic(c);
    if (c.command == "solve-heat") return run_solve_heat(c);
    if (c.command == "verify-schauder") return run_verify_schauder(c);
    if (c.command == "flow") return run_flow(c);
    if (c.command == "sweep") return run_sweep(c);
    throw ConfigError("unknown command '" + c.command + "'");
}

/// What a run would do, without computing.
inline nlohmann::json plan(const ExperimentConfig& c) {
    nlohmann::json p{{"command", c.command}, {"config_hash", config_hash(c)}, {"config", to_json(c)}};
    std::vector<std::string> steps, files;
    const auto a = c.angles();
    const auto g = make_grid(a, c.grid_spec());
    p["grid_nodes"] = g->size();
    if (c.command == "solve-elliptic") {
        steps.push_back("solve the Dirichlet problem on the " + c.domain + " (" + std::to_string(g->size()) + " nodes)");
        if (c.oracle) steps.push_back("eps-ladder oracle over " + std::to_string(c.eps_schedule.size()) + " eps values");
        if (c.max_principle_trials > 0) steps.push_back(std::to_string(c.max_principle_trials) + " randomized maximum-principle trials");
        files = {"solution.field", "solution.csv"};
        if (c.oracle) files.push_back("oracle.csv");
    } else if (c.command == "solve-heat") {
        steps.push_back("heat solve to T = " + std::to_string(c.heat_T) + " in " + std::to_string(c.grid.time_steps) + " steps");
        files = {"heat.csv", "trajectory.stf"};
    } else if (c.command == "verify-schauder") {
        for (double al : c.alphas) steps.push_back("Schauder table at alpha = " + std::to_string(al));
        steps.push_back("closed-form sharpness witnesses");
        files = {"schauder.csv"};
    } else if (c.command == "flow") {
        steps.push_back("Monge-Ampere flow to T = " + std::to_string(c.flow_T) + " in " + std::to_string(c.flow_steps) + " steps");
        if (c.linearization_check) steps.push_back("linearization check at the final state");
        if (c.horizon_epsilon > 0.0) steps.push_back("short-time horizon search");
        files = {"flow.csv", "trajectory.stf"};
    } else {
        for (const auto& b : c.sweep_betas) steps.push_back(c.sweep_analysis + " analysis at beta = " + exp_detail::betas_key(b));
        files = {"sweep.csv"};
    }
    files.push_back("summary.json");
    p["steps"] = steps;
    p["outputs"] = files;
    return p;
}

} // namespace conelab
