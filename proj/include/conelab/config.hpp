#pragma once

// Experiment configuration: one JSON document per run. Parsing fills every default, so
// to_json(parse(x)) is the normalized form and parse -> serialize -> parse is a fixed point.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "conelab/elliptic.hpp"
#include "conelab/field_io.hpp"
#include "conelab/parabolic.hpp"

namespace conelab {

/// Invalid configuration; the CLI maps it to exit code 2.
class ConfigError : public UsageError {
public:
    using UsageError::UsageError;
};

inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"solve-elliptic", "solve-heat", "verify-schauder", "flow", "sweep"};
    return c;
}

struct GridConfig {
    int radial = 24, angular = 16, tangential = 25;
    int tangential_axes = -1;
    int time_steps = 50;
    double grading = 0.0, half_width = 1.0, radius = 1.0;
    bool periodic = false;
};

struct ExperimentConfig {
    std::string command = "solve-elliptic";
    std::vector<double> betas{0.75};
    int n = 2;
    GridConfig grid;
    std::string domain = "polydisk"; // polydisk | cone_ball
    double domain_radius = 1.0;
    std::vector<double> alphas{0.1};
    // field selectors: see field_registry()
    std::string rhs = "zero", boundary = "re_z(1)", initial = "zero";
    std::vector<std::string> chi; // flow: one per complex direction, empty = all zero
    double linear_tol = 1e-12, newton_tol = 1e-12, residual_target = 1e-10;
    std::uint64_t seed = 0;
    std::string out = "out";
    // solve-elliptic
    bool oracle = false;
    std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4, 1e-5};
    int oracle_nodes = 65;
    int max_principle_trials = 0;
    // solve-heat
    double heat_T = 0.05, theta = 0.5;
    // flow
    double flow_T = 1.0;
    int flow_steps = 100;
    bool linearization_check = true;
    double horizon_epsilon = 0.0; // > 0: also search the short-time horizon
    // sweep
    std::vector<std::vector<double>> sweep_betas;
    std::string sweep_analysis = "cap"; // cap | schauder
    int threads = 1;

    [[nodiscard]] ConeAngles angles() const { return ConeAngles(betas, n); }
    [[nodiscard]] GridSpec grid_spec() const {
        GridSpec g;
        g.radial_intervals = grid.radial;
        g.angular_nodes = grid.angular;
        g.tangential_nodes = grid.tangential;
        g.tangential_axes = grid.tangential_axes;
        g.grading = grid.grading;
        g.half_width = grid.half_width;
        g.radius = grid.radius;
        g.periodic = grid.periodic;
        return g;
    }
    [[nodiscard]] Domain domain_spec() const {
        return {domain == "cone_ball" ? DomainKind::ConeBall : DomainKind::Polydisk, domain_radius};
    }
};

// ---------------------------------------------------------------- field selectors

struct FieldSelector {
    std::string name;
    std::optional<double> arg;
    std::string path; // file:PATH
};

inline FieldSelector parse_selector(const std::string& s) {
    FieldSelector out;
    if (s.rfind("file:", 0) == 0) {
        out.name = "file";
        out.path = s.substr(5);
        check_config(!out.path.empty(), "field selector 'file:' needs a path");
        return out;
    }
    const auto open = s.find('(');
    if (open == std::string::npos) {
        out.name = s;
        return out;
    }
    check_config(s.back() == ')', "field selector '" + s + "': missing ')'");
    out.name = s.substr(0, open);
    const std::string a = s.substr(open + 1, s.size() - open - 2);
    std::size_t used = 0;
    try {
        out.arg = std::stod(a, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    check_config(used == a.size() && used > 0, "field selector '" + s + "': argument is not a number");
    return out;
}

struct BuiltinField {
    std::string name;
    bool takes_arg;
    std::string doc;
};

inline const std::vector<BuiltinField>& field_registry() {
    static const std::vector<BuiltinField> r{
        {"zero", false, "0"},
        {"const", true, "the constant c"},
        {"re_z", true, "Re z_j = r_j^{1/beta_j} cos(theta_j), j 1-based"},
        {"modulus_z", true, "|z_j| = r_j^{1/beta_j}"},
        {"r_power", true, "r_1^a"},
        {"tangential_sine", false, "sin(2 pi s_1)"},
        {"tangential_square", false, "sum of s_a^2"},
        {"witness", false, "Re z_1 * s_1"},
        {"bump", false, "(1 - r_1^2) cos(pi s_1 / 2)"},
        {"heat_mode", false, "exp(-4 pi^2 t) sin(2 pi s_1)"},
        {"file", false, "file:PATH, a saved field interpolated at each point"},
    };
    return r;
}

inline void check_selector(const std::string& s, const ExperimentConfig& c) {
    const auto sel = parse_selector(s);
    const BuiltinField* b = nullptr;
    for (const auto& f : field_registry())
        if (f.name == sel.name) b = &f;
    check_config(b != nullptr, "unknown field '" + sel.name + "'");
    if (sel.name == "file") {
        check_config(std::filesystem::is_regular_file(sel.path), "field file '" + sel.path + "' does not exist");
        return;
    }
    check_config(b->takes_arg == sel.arg.has_value(), "field '" + sel.name + (b->takes_arg ? "' needs an argument" : "' takes no argument"));
    if (sel.name == "re_z" || sel.name == "modulus_z") {
        const double j = *sel.arg;
        check_config(j == std::floor(j) && j >= 1 && j <= static_cast<double>(c.betas.size()),
                     "field '" + s + "': factor index out of range");
    }
    if (sel.name == "r_power") check_config(*sel.arg >= 0.0, "field '" + s + "': exponent must be nonnegative");
}

/// Space-time evaluator for a selector; time-independent selectors ignore t.
inline SpaceTimeEvaluator make_field(const std::string& s, const ConeAngles& a) {
    const auto sel = parse_selector(s);
    const double pi = std::numbers::pi;
    auto s1 = [](const ConePoint& x) { return x.tangential().empty() ? 0.0 : x.tangential()[0]; };
    if (sel.name == "zero") return [](const ConePoint&, double) { return 0.0; };
    if (sel.name == "const") return [c = *sel.arg](const ConePoint&, double) { return c; };
    if (sel.name == "re_z" || sel.name == "modulus_z") {
        const int j = static_cast<int>(*sel.arg) - 1;
        const double e = 1.0 / a.beta(j);
        const bool re = sel.name == "re_z";
        return [j, e, re](const ConePoint& x, double) { return std::pow(x.r(j), e) * (re ? std::cos(x.theta(j)) : 1.0); };
    }
    if (sel.name == "r_power") return [e = *sel.arg](const ConePoint& x, double) { return std::pow(x.r(0), e); };
    if (sel.name == "tangential_sine") return [s1, pi](const ConePoint& x, double) { return std::sin(2 * pi * s1(x)); };
    if (sel.name == "tangential_square")
        return [](const ConePoint& x, double) {
            double m = 0.0;
            for (double v : x.tangential()) m += v * v;
            return m;
        };
    if (sel.name == "witness")
        return [s1, e = 1.0 / a.beta(0)](const ConePoint& x, double) { return std::pow(x.r(0), e) * std::cos(x.theta(0)) * s1(x); };
    if (sel.name == "bump")
        return [s1, pi](const ConePoint& x, double) { return (1.0 - x.r(0) * x.r(0)) * std::cos(0.5 * pi * s1(x)); };
    if (sel.name == "heat_mode")
        return [s1, pi](const ConePoint& x, double t) { return std::exp(-4 * pi * pi * t) * std::sin(2 * pi * s1(x)); };
    if (sel.name == "file") {
        auto u = std::make_shared<GridFunction>(load_field(sel.path));
        return [u](const ConePoint& x, double) { return u->interpolate(x); };
    }
    throw ConfigError("unknown field '" + sel.name + "'");
}

inline Evaluator at_time(SpaceTimeEvaluator f, double t = 0.0) {
    return [f = std::move(f), t](const ConePoint& x) { return f(x, t); };
}

// ---------------------------------------------------------------- JSON

inline nlohmann::json to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json j;
    j["command"] = c.command;
    j["betas"] = c.betas;
    j["n"] = c.n;
    j["grid"] = {{"radial", c.grid.radial},         {"angular", c.grid.angular},       {"tangential", c.grid.tangential},
                 {"tangential_axes", c.grid.tangential_axes}, {"time_steps", c.grid.time_steps}, {"grading", c.grid.grading},
                 {"half_width", c.grid.half_width}, {"radius", c.grid.radius},         {"periodic", c.grid.periodic}};
    j["domain"] = {{"kind", c.domain}, {"radius", c.domain_radius}};
    j["alphas"] = c.alphas;
    j["fields"] = {{"rhs", c.rhs}, {"boundary", c.boundary}, {"initial", c.initial}, {"chi", c.chi}};
    j["tolerances"] = {{"linear", c.linear_tol}, {"newton", c.newton_tol}, {"residual_target", c.residual_target}};
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["elliptic"] = {{"oracle", c.oracle}, {"eps_schedule", c.eps_schedule}, {"oracle_nodes", c.oracle_nodes},
                     {"max_principle_trials", c.max_principle_trials}};
    j["heat"] = {{"T", c.heat_T}, {"theta", c.theta}};
    j["flow"] = {{"T", c.flow_T}, {"steps", c.flow_steps}, {"linearization_check", c.linearization_check},
                 {"horizon_epsilon", c.horizon_epsilon}};
    j["sweep"] = {{"betas", c.sweep_betas}, {"analysis", c.sweep_analysis}, {"threads", c.threads}};
    return j;
}

namespace config_detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: '" + where + key + "' has the wrong type");
    }
}

inline void no_unknown_keys(const nlohmann::json& j, const nlohmann::json& ref, const std::string& where) {
    check_config(j.is_object(), "config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        check_config(ref.contains(k), "config: unknown key '" + where + k + "'");
        if (ref.at(k).is_object()) no_unknown_keys(v, ref.at(k), where + k + ".");
    }
}

} // namespace config_detail

/// Parses and fills defaults; does not validate values (see validate).
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using config_detail::read;
    ExperimentConfig c;
    config_detail::no_unknown_keys(j, to_json(c), "");
    read(j, "command", c.command, "");
    read(j, "betas", c.betas, "");
    read(j, "n", c.n, "");
    read(j, "alphas", c.alphas, "");
    read(j, "seed", c.seed, "");
    read(j, "out", c.out, "");
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        read(g, "radial", c.grid.radial, "grid.");
        read(g, "angular", c.grid.angular, "grid.");
        read(g, "tangential", c.grid.tangential, "grid.");
        read(g, "tangential_axes", c.grid.tangential_axes, "grid.");
        read(g, "time_steps", c.grid.time_steps, "grid.");
        read(g, "grading", c.grid.grading, "grid.");
        read(g, "half_width", c.grid.half_width, "grid.");
        read(g, "radius", c.grid.radius, "grid.");
        read(g, "periodic", c.grid.periodic, "grid.");
    }
    if (j.contains("domain")) {
        read(j["domain"], "kind", c.domain, "domain.");
        read(j["domain"], "radius", c.domain_radius, "domain.");
    }
    if (j.contains("fields")) {
        const auto& f = j["fields"];
        read(f, "rhs", c.rhs, "fields.");
        read(f, "boundary", c.boundary, "fields.");
        read(f, "initial", c.initial, "fields.");
        read(f, "chi", c.chi, "fields.");
    }
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        read(t, "linear", c.linear_tol, "tolerances.");
        read(t, "newton", c.newton_tol, "tolerances.");
        read(t, "residual_target", c.residual_target, "tolerances.");
    }
    if (j.contains("elliptic")) {
        const auto& e = j["elliptic"];
        read(e, "oracle", c.oracle, "elliptic.");
        read(e, "eps_schedule", c.eps_schedule, "elliptic.");
        read(e, "oracle_nodes", c.oracle_nodes, "elliptic.");
        read(e, "max_principle_trials", c.max_principle_trials, "elliptic.");
    }
    if (j.contains("heat")) {
        read(j["heat"], "T", c.heat_T, "heat.");
        read(j["heat"], "theta", c.theta, "heat.");
    }
    if (j.contains("flow")) {
        const auto& f = j["flow"];
        read(f, "T", c.flow_T, "flow.");
        read(f, "steps", c.flow_steps, "flow.");
        read(f, "linearization_check", c.linearization_check, "flow.");
        read(f, "horizon_epsilon", c.horizon_epsilon, "flow.");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        read(s, "betas", c.sweep_betas, "sweep.");
        read(s, "analysis", c.sweep_analysis, "sweep.");
        read(s, "threads", c.threads, "sweep.");
    }
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    check_config(static_cast<bool>(in), "config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text: keys sorted, fixed indentation, so equal configs serialize byte-identically.
inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a 64 of the canonical text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// ---------------------------------------------------------------- validation

inline void check_betas(const std::vector<double>& b, int n, const std::string& where) {
    check_config(!b.empty(), where + ": need at least one beta");
    for (double v : b) check_config(v > 0.0 && v < 1.0, where + ": beta = " + std::to_string(v) + " is outside (0, 1)");
    check_config(static_cast<int>(b.size()) <= n, where + ": more cone factors than the dimension n");
}

/// Nearest existing ancestor of the output directory must be a writable directory.
inline void check_writable(const std::string& out) {
    namespace fs = std::filesystem;
    check_config(!out.empty(), "config: 'out' is empty");
    fs::path p = fs::absolute(out);
    while (!fs::exists(p) && p.has_parent_path() && p != p.parent_path()) p = p.parent_path();
    check_config(fs::is_directory(p), "config: output path '" + out + "' is not under a directory");
    check_config(::access(p.c_str(), W_OK) == 0, "config: output path '" + out + "' is not writable");
}

inline void validate(const ExperimentConfig& c) {
    const auto& cmds = known_commands();
    check_config(std::find(cmds.begin(), cmds.end(), c.command) != cmds.end(), "config: unknown command '" + c.command + "'");
    check_config(c.n >= 1 && c.n <= 4, "config: n must be in 1..4");
    check_betas(c.betas, c.n, "config");
    const auto& g = c.grid;
    check_config(g.radial >= 2 && g.angular >= 4 && g.tangential >= 3 && g.time_steps >= 1, "config: grid sizes too small");
    check_config(g.tangential_axes >= -1 && g.tangential_axes <= 2 * (c.n - static_cast<int>(c.betas.size())),
                 "config: grid.tangential_axes exceeds 2(n - p)");
    check_config(g.grading >= 0.0 && g.half_width > 0.0 && g.radius > 0.0, "config: grid grading/half_width/radius");
    check_config(c.domain == "polydisk" || c.domain == "cone_ball", "config: domain.kind must be polydisk or cone_ball");
    check_config(c.domain_radius > 0.0, "config: domain.radius must be positive");
    check_config(!c.alphas.empty(), "config: need at least one alpha");
    for (double a : c.alphas) check_config(a > 0.0 && a <= 1.0, "config: alpha must lie in (0, 1]");
    for (const auto* s : {&c.rhs, &c.boundary, &c.initial}) check_selector(*s, c);
    for (const auto& s : c.chi) check_selector(s, c);
    check_config(c.linear_tol > 0.0 && c.newton_tol > 0.0 && c.residual_target > 0.0, "config: tolerances must be positive");
    for (std::size_t k = 0; k < c.eps_schedule.size(); ++k) {
        check_config(c.eps_schedule[k] > 0.0, "config: eps_schedule entries must be positive");
        if (k > 0) check_config(c.eps_schedule[k] < c.eps_schedule[k - 1], "config: eps_schedule must decrease");
    }
    check_config(!c.oracle || !c.eps_schedule.empty(), "config: the oracle needs an eps schedule");
    check_config(c.oracle_nodes >= 9 && c.max_principle_trials >= 0, "config: oracle_nodes >= 9, max_principle_trials >= 0");
    check_config(c.heat_T > 0.0 && c.theta >= 0.5 && c.theta <= 1.0, "config: heat.T > 0 and theta in [1/2, 1]");
    check_config(c.flow_T > 0.0 && c.flow_steps >= 1 && c.horizon_epsilon >= 0.0, "config: flow.T, flow.steps, horizon_epsilon");
    check_config(c.threads >= 1, "config: threads must be at least 1");
    check_config(c.sweep_analysis == "cap" || c.sweep_analysis == "schauder", "config: sweep.analysis must be cap or schauder");
    if (c.command == "sweep") {
        check_config(!c.sweep_betas.empty(), "config: sweep.betas is empty");
        for (const auto& b : c.sweep_betas) check_betas(b, c.n, "config: sweep.betas");
    }
    check_writable(c.out);
}

} // namespace conelab
