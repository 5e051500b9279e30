// qpde: train, integrate the wide-network limit, inspect kernels, or run the
// property suite. See README.md for the run-directory layout.

#include "qpde/commands.hpp"
#include "qpde/config.hpp"
#include "qpde/verify.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

// Step budget used by --long: the full-length runs of the original experiments.
constexpr std::size_t kLongSteps = 30000;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    bool print_config = false;
    bool long_run = false;
};

qpde::ExperimentConfig resolve(const Flags& f) {
    qpde::ExperimentConfig cfg = f.config.empty() ? qpde::ExperimentConfig{} : qpde::load_config(f.config);
    if (f.seed) {
        cfg.run.seed = *f.seed;
    } else if (const char* env = std::getenv("QPDE_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            cfg.run.seed = std::stoull(env, &used);
            if (env[used] != '\0') throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw qpde::ConfigError(std::string("QPDE_SEED: expected an unsigned integer, got '") + env + "'");
        }
    }
    if (f.out) cfg.run.out = *f.out;
    if (f.threads) cfg.run.threads = *f.threads;
    if (f.long_run) cfg.trainer.max_steps = std::max(cfg.trainer.max_steps, kLongSteps);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh-free elliptic PDE solver with NTK and wide-network-limit diagnostics", "qpde"};
    app.set_version_flag("--version", QPDE_VERSION);
    app.require_subcommand(1);

    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "config file (defaults apply to absent keys)")->check(CLI::ExistingFile);
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { flags.seed = v; },
                                                "run seed (falls back to $QPDE_SEED, then run.seed)");
        sub->add_option_function<std::string>("--out", [&](const std::string& v) { flags.out = v; }, "run directory");
        sub->add_option_function<int>("--threads", [&](const int& v) { flags.threads = v; }, "worker threads")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", flags.print_config, "print the resolved config and exit");
    };

    auto* solve = app.add_subcommand("solve", "train a network on the configured problem");
    add_common(solve);
    solve->add_flag("--long", flags.long_run, "raise the step budget to the full-length 30000 steps");
    auto* limit = app.add_subcommand("limit", "integrate the wide-network limit ODE");
    add_common(limit);
    auto* kdiag = app.add_subcommand("kernel-diag", "kernel matrices, PSD summaries and NTK drift");
    add_common(kdiag);
    auto* verify = app.add_subcommand("verify", "run the property suite");
    add_common(verify);

    CLI11_PARSE(app, argc, argv);

    try {
        const qpde::ExperimentConfig cfg = resolve(flags);
        if (flags.print_config) {
            qpde::write_config(std::cout, cfg);
            return 0;
        }
        if (*solve) return qpde::cmd_solve(cfg, std::cerr);
        if (*limit) return qpde::cmd_limit(cfg, std::cerr);
        if (*kdiag) return qpde::cmd_kernel_diag(cfg, std::cerr);
        return qpde::cmd_verify(cfg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "qpde: " << e.what() << '\n';
        return qpde::kExitError;
    }
}
