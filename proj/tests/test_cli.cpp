#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sys/wait.h>

#include "conelab/conelab.hpp"

using namespace conelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("conelab_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig small(const std::string& command) {
    ExperimentConfig c;
    c.command = command;
    c.grid.radial = 12;
    c.grid.angular = 8;
    c.grid.tangential = 9;
    c.grid.tangential_axes = 1;
    c.grid.time_steps = 10;
    c.out = scratch(command).string();
    return c;
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(CONELAB_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Config, DefaultsRoundTripAsAFixedPoint) {
    const ExperimentConfig c;
    const auto text = serialize_config(c);
    const auto again = parse_config(text);
    EXPECT_EQ(serialize_config(again), text);
    EXPECT_EQ(config_hash(again), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, RandomConfigsRoundTrip) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.01, 0.99);
    std::uniform_int_distribution<int> I(2, 40);
    for (int trial = 0; trial < 50; ++trial) {
        ExperimentConfig c;
        c.command = known_commands()[static_cast<std::size_t>(trial) % known_commands().size()];
        c.betas = {U(rng), U(rng)};
        c.n = 3;
        c.grid.radial = I(rng);
        c.grid.grading = U(rng) * 3;
        c.alphas = {U(rng), U(rng), U(rng)};
        c.seed = rng();
        c.chi = {"zero", "const(" + std::to_string(U(rng)) + ")"};
        c.sweep_betas = {{U(rng)}, {U(rng), U(rng)}};
        c.eps_schedule = {U(rng), U(rng) * 1e-3};
        // parse -> normalize -> serialize -> parse
        const auto once = serialize_config(parse_config(serialize_config(c)));
        EXPECT_EQ(serialize_config(parse_config(once)), once);
        EXPECT_EQ(parse_config(once).betas, c.betas); // doubles survive exactly
        EXPECT_EQ(parse_config(once).seed, c.seed);
    }
}

TEST(Config, PartialDocumentsAreNormalized) {
    const auto c = parse_config(R"({"betas": [0.6], "grid": {"radial": 10}})");
    EXPECT_EQ(c.grid.radial, 10);
    EXPECT_EQ(c.grid.angular, ExperimentConfig{}.grid.angular);
    EXPECT_NE(config_hash(c), config_hash(ExperimentConfig{}));
    EXPECT_THROW(parse_config(R"({"betas": [0.6], "gird": {}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"grid": {"radial": "many"}})"), ConfigError);
    EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, Validation) {
    auto c = small("solve-elliptic");
    EXPECT_NO_THROW(validate(c));
    c.betas = {1.2};
    EXPECT_THROW(validate(c), ConfigError);
    c = small("solve-elliptic");
    c.boundary = "no_such_field";
    EXPECT_THROW(validate(c), ConfigError);
    c.boundary = "re_z(2)"; // only one factor
    EXPECT_THROW(validate(c), ConfigError);
    c.boundary = "re_z";
    EXPECT_THROW(validate(c), ConfigError);
    c.boundary = "file:/nonexistent/field";
    EXPECT_THROW(validate(c), ConfigError);
    c = small("solve-elliptic");
    c.alphas = {0.0};
    EXPECT_THROW(validate(c), ConfigError);
    c = small("sweep");
    EXPECT_THROW(validate(c), ConfigError); // no tuples
    c.sweep_betas = {{0.5}, {1.0}};
    EXPECT_THROW(validate(c), ConfigError);
    c = small("flow");
    const auto blocker = scratch("blocker");
    std::ofstream(blocker) << "a file, not a directory";
    c.out = (blocker / "out").string();
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, FieldSelectors) {
    const ConeAngles a({0.5}, 2);
    const ConePoint x({{0.5, 0.0}}, {0.25, 0.0});
    EXPECT_NEAR(make_field("re_z(1)", a)(x, 0.0), 0.25, 1e-15);
    EXPECT_NEAR(make_field("const(2.5)", a)(x, 0.0), 2.5, 0.0);
    EXPECT_NEAR(make_field("r_power(0.3)", a)(x, 0.0), std::pow(0.5, 0.3), 1e-15);
    EXPECT_NEAR(make_field("witness", a)(x, 0.0), 0.25 * 0.25, 1e-15);
    EXPECT_NEAR(make_field("heat_mode", a)(x, 0.1), std::exp(-0.4 * std::numbers::pi * std::numbers::pi), 1e-15);
    EXPECT_THROW(parse_selector("const(x)"), ConfigError);
}

TEST(Experiments, MinimalEllipticRunHasSmallResidual) {
    auto c = small("solve-elliptic");
    c.betas = {0.99};
    const auto r = run_experiment(c);
    EXPECT_LE(r.results["residual"].get<double>(), 1e-10);
    EXPECT_EQ(r.results["maximum_principle"]["violations"].get<long>(), 0);
    EXPECT_TRUE(r.files.count("solution.field"));
    EXPECT_TRUE(r.files.count("solution.csv"));
}

TEST(Experiments, OracleRunEmitsBothSolutions) {
    auto c = small("solve-elliptic");
    c.boundary = "modulus_z(1)";
    c.oracle = true;
    c.oracle_nodes = 33;
    c.eps_schedule = {1e-2, 1e-4};
    const auto r = run_experiment(c);
    ASSERT_TRUE(r.files.count("oracle.csv"));
    const double d = r.results["oracle"]["relative_sup_difference"].get<double>();
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 0.2);
    // the CSV carries both solutions; recompute the sup difference from it
    std::istringstream is(r.files.at("oracle.csv"));
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "node,u_eps,u_cone");
    double diff = 0.0, scale = 0.0;
    while (std::getline(is, line)) {
        const auto p1 = line.find(','), p2 = line.find(',', p1 + 1);
        const double ue = std::stod(line.substr(p1 + 1, p2 - p1 - 1)), uc = std::stod(line.substr(p2 + 1));
        diff = std::max(diff, std::abs(ue - uc));
        scale = std::max(scale, std::abs(ue));
    }
    EXPECT_NEAR(diff / scale, d, 1e-12);
}

TEST(Experiments, IdenticalConfigAndSeedGiveIdenticalFiles) {
    for (const std::string cmd : {"solve-elliptic", "solve-heat", "flow"}) {
        auto c = small(cmd);
        c.boundary = cmd == "solve-heat" ? "zero" : "re_z(1)";
        c.initial = "bump";
        c.rhs = cmd == "flow" ? "bump" : "zero";
        c.flow_T = 0.05;
        c.flow_steps = 5;
        c.max_principle_trials = cmd == "solve-elliptic" ? 2 : 0;
        c.seed = 99;
        const auto a = run_experiment(c), b = run_experiment(c);
        EXPECT_EQ(a.files, b.files) << cmd;
        EXPECT_EQ(a.results.dump(), b.results.dump()) << cmd;
    }
}

TEST(Experiments, SweepEmitsThreeRowCapTable) {
    auto c = small("sweep");
    c.sweep_betas = {{0.9}, {0.6}, {0.75}};
    c.threads = 3;
    const auto r = run_experiment(c);
    const auto& csv = r.files.at("sweep.csv");
    std::istringstream is(csv);
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], sweep_header("cap"));
    EXPECT_EQ(lines[1].rfind("0.59999999999999998,", 0), 0u); // sorted by beta
    EXPECT_EQ(lines[3].rfind("0.90000000000000002,", 0), 0u);
    for (const auto& t : r.results["tuples"]) EXPECT_EQ(t["status"], "ok");
    // fitted caps against 1/beta - 1
    for (std::size_t k = 1; k < 4; ++k) {
        std::istringstream ls(lines[k]);
        std::string beta, cap, fitted;
        std::getline(ls, beta, ',');
        std::getline(ls, cap, ',');
        std::getline(ls, fitted, ',');
        EXPECT_NEAR(std::stod(cap), 1.0 / std::stod(beta) - 1.0, 1e-12);
        EXPECT_NEAR(std::stod(fitted), std::stod(cap), 0.05) << beta;
    }
    c.threads = 1;
    EXPECT_EQ(run_experiment(c).files, r.files); // merge order does not depend on the worker count
}

TEST(Experiments, SweepRecordsPerTupleFailures) {
    auto c = small("sweep");
    c.n = 1;
    c.sweep_betas = {{0.7}, {0.8}}; // n = 1, p = 1: no witness exists
    const auto r = run_experiment(c);
    EXPECT_EQ(r.results["failed"].get<int>(), 2);
    const auto& csv = r.files.at("sweep.csv");
    EXPECT_NE(csv.find(",failed,"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Experiments, FlowWithZeroForcingIsAFixedPoint) {
    auto c = small("flow");
    c.rhs = "zero";
    c.flow_T = 1.0;
    c.flow_steps = 100;
    const auto r = run_experiment(c);
    EXPECT_LE(r.results["sup_phi"].get<double>(), 1e-10);
    EXPECT_EQ(r.results["steps"].get<int>(), 100);
}

TEST(Experiments, DryRunPlansWithoutComputing) {
    auto c = small("verify-schauder");
    c.alphas = {0.1, 0.2};
    const auto p = plan(c);
    EXPECT_EQ(p["steps"].size(), 3u);
    EXPECT_EQ(p["config_hash"], config_hash(c));
    EXPECT_FALSE(fs::exists(c.out));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    fs::create_directories(dir);
    const auto cfg = dir / "bad.json";
    std::ofstream(cfg) << R"({"betas": [1.2]})";
    EXPECT_EQ(run_cli("solve-elliptic --config " + cfg.string()), 2);
    EXPECT_FALSE(fs::exists(dir / "out"));

    const auto ok = dir / "ok.json";
    std::ofstream(ok) << R"({"grid": {"radial": 8, "angular": 8, "tangential": 9, "tangential_axes": 1}})";
    EXPECT_EQ(run_cli("solve-elliptic --dry-run --config " + ok.string() + " --out " + (dir / "dry").string()), 0);
    EXPECT_FALSE(fs::exists(dir / "dry"));
    EXPECT_EQ(run_cli("solve-elliptic --config " + ok.string() + " --out " + (dir / "run").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "summary.json"));
    const auto summary = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
    EXPECT_EQ(summary["status"], "ok");
    EXPECT_EQ(summary["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(summary.contains("wall_time_s"));
    EXPECT_TRUE(summary["versions"].contains("eigen"));

    // a reference form that leaves the sandwich immediately: the stepper gives up
    const auto breach = dir / "breach.json";
    std::ofstream(breach) << R"J({"grid": {"radial": 8, "angular": 8, "tangential": 9, "tangential_axes": 1},
                                 "fields": {"chi": ["const(-50)", "zero"]}, "flow": {"T": 1.0, "steps": 2}})J";
    EXPECT_EQ(run_cli("flow --config " + breach.string() + " --out " + (dir / "breach").string()), 3);
    EXPECT_TRUE(fs::exists(dir / "breach" / "error.json"));
    EXPECT_EQ(run_cli("no-such-command"), 2);
}

TEST(Cli, RepeatedRunsAreByteIdenticalInCsv) {
    const auto dir = scratch("repeat");
    fs::create_directories(dir);
    const auto cfg = dir / "c.json";
    std::ofstream(cfg) << R"({"grid": {"radial": 8, "angular": 8, "tangential": 9, "tangential_axes": 1},
                              "elliptic": {"max_principle_trials": 2}})";
    ASSERT_EQ(run_cli("solve-elliptic --seed 5 --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("solve-elliptic --seed 5 --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
    for (const char* f : {"solution.csv", "solution.field"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}
