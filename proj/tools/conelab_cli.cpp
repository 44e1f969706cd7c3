#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "conelab/conelab.hpp"

using namespace conelab;

namespace {

enum Exit { kOk = 0, kValidation = 2, kSolver = 3 };

// machine-readable error record on stderr, and under the output directory when one is usable
int fail(Exit code, const std::string& kind, const std::string& message, const std::string& out_dir) {
    nlohmann::json rec{{"status", "error"}, {"kind", kind}, {"message", message}, {"exit_code", static_cast<int>(code)}};
    std::cerr << rec.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (!ec) std::ofstream(std::filesystem::path(out_dir) / "error.json") << rec.dump(2) << "\n";
    }
    return code;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream os(p, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("cannot write " + p.string());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conelab: numerical experiments on conical Laplace, heat and Monge-Ampere problems"};
    app.require_subcommand(1);
    std::string config_path, out;
    std::uint64_t seed = 0;
    int threads = 0;
    bool dry_run = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "run seed (overrides the config)");
    auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
    app.add_option("--threads", threads, "sweep workers (overrides the config)")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", dry_run, "validate and print the resolved plan without computing");
    for (const auto& name : known_commands()) app.add_subcommand(name)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        cfg.command = command;
        if (*seed_opt) cfg.seed = seed;
        if (*out_opt) cfg.out = out;
        if (threads > 0) cfg.threads = threads;
        validate(cfg);
    } catch (const UsageError& e) {
        return fail(kValidation, "validation", e.what(), "");
    }

    if (dry_run) {
        try {
            std::cout << plan(cfg).dump(2) << "\n";
        } catch (const UsageError& e) {
            return fail(kValidation, "validation", e.what(), "");
        }
        return kOk;
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunOutput res;
    try {
        res = run_experiment(cfg);
    } catch (const UsageError& e) {
        return fail(kValidation, "validation", e.what(), cfg.out);
    } catch (const SolverError& e) {
        return fail(kSolver, "solver", e.what(), cfg.out);
    } catch (const std::exception& e) {
        return fail(kSolver, "runtime", e.what(), cfg.out);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json summary{{"status", "ok"},
                           {"command", cfg.command},
                           {"config_hash", config_hash(cfg)},
                           {"seed", cfg.seed},
                           {"versions", library_versions()},
                           {"wall_time_s", wall},
                           {"results", res.results},
                           {"config", to_json(cfg)}};
    try {
        const std::filesystem::path dir(cfg.out);
        std::filesystem::create_directories(dir);
        for (const auto& [name, bytes] : res.files) write_file(dir / name, bytes);
        write_file(dir / "summary.json", summary.dump(2) + "\n");
    } catch (const std::exception& e) {
        return fail(kValidation, "output", e.what(), "");
    }
    std::cout << summary.dump(2) << "\n";
    return kOk;
}
