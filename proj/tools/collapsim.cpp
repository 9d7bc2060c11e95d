// collapsim command line: seeded batch experiments with CSV/JSON output.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "collapsim/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"GRW flash-process simulator and consistency checks"};
    app.require_subcommand(1);

    // run
    std::string experiment, config_file, out_dir;
    std::uint64_t seed = 0;
    long trials = 0;
    std::vector<std::string> param_kv;
    bool have_seed = false, have_trials = false, have_out = false;

    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
    run_cmd->add_option("experiment", experiment, "experiment name")->required();
    run_cmd->add_option("--config", config_file, "flat key = value config file");
    run_cmd->add_option("--seed", seed, "master RNG seed")->each([&](const std::string&) {
        have_seed = true;
    });
    run_cmd->add_option("--trials", trials, "trial count")->each([&](const std::string&) {
        have_trials = true;
    });
    run_cmd->add_option("--out", out_dir, "output directory")->each([&](const std::string&) {
        have_out = true;
    });
    run_cmd->add_option("--param", param_kv, "key=value override (repeatable)");
    // physics parameters may also be passed directly, e.g. --tau 1
    run_cmd->allow_extras(true);

    CLI::App* list_cmd = app.add_subcommand("list", "list experiments and their tolerances");

    CLI11_PARSE(app, argc, argv);

    if (list_cmd->parsed()) {
        for (const std::string& name : collapsim::experiment_names()) {
            std::printf("%s (default trials: %ld)\n", name.c_str(),
                        collapsim::default_trials(name));
            for (const collapsim::ParamSpec& p : collapsim::experiment_params(name))
                std::printf("    --param %s=%g  %s\n", p.name.c_str(), p.default_value,
                            p.help.c_str());
            for (const std::string& tol : collapsim::experiment_tolerances(name))
                std::printf("    check: %s\n", tol.c_str());
        }
        return 0;
    }

    collapsim::ExperimentConfig cfg;
    try {
        if (!config_file.empty()) cfg = collapsim::parse_config_file(config_file);
        cfg.experiment = experiment;  // CLI experiment name wins
        if (have_seed) cfg.seed = seed;
        if (have_trials) cfg.trials = trials;
        if (have_out) cfg.out_dir = out_dir;
        for (const std::string& kv : param_kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--param expects key=value, got " + kv);
            collapsim::set_param(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        // leftover --key value / --key=value pairs are experiment parameters
        const std::vector<std::string> extras = run_cmd->remaining();
        for (std::size_t i = 0; i < extras.size(); ++i) {
            std::string key = extras[i];
            if (key.rfind("--", 0) != 0)
                throw std::invalid_argument("unexpected argument: " + key);
            key = key.substr(2);
            const auto eq = key.find('=');
            if (eq != std::string::npos) {
                collapsim::set_param(cfg, key.substr(0, eq), key.substr(eq + 1));
            } else {
                if (i + 1 >= extras.size())
                    throw std::invalid_argument("missing value for --" + key);
                collapsim::set_param(cfg, key, extras[++i]);
            }
        }
        // validate the experiment name and params eagerly
        (void)collapsim::experiment_params(cfg.experiment);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    try {
        const collapsim::RunSummary summary = collapsim::run(cfg);
        std::printf("%s\n", summary.json.dump(2).c_str());
        return summary.passed ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
