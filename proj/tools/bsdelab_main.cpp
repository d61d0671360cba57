#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bsdelab/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0;
    bool trials_set = false;
};

void attach_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration file (key = value lines)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--trials", flags.trials, "number of randomized trials")
        ->each([&](const std::string&) { flags.trials_set = true; });
}

int run_with(const std::string& experiment, const CommonFlags& flags) {
    try {
        bsdelab::RunConfig cfg = flags.config_path.empty()
                                     ? bsdelab::RunConfig{}
                                     : bsdelab::RunConfig::parse_file(flags.config_path);
        cfg.set("experiment", experiment);
        if (!flags.out_dir.empty()) cfg.set("out", flags.out_dir);
        if (flags.seed_set) cfg.set("seed", std::to_string(flags.seed));
        if (flags.trials_set) cfg.set("trials", std::to_string(flags.trials));

        const bsdelab::RunResult result = bsdelab::run_experiment(cfg);
        if (result.exit_code == 2) return 2;
        std::cout << "run " << result.run_id << " -> " << result.out_dir << " ("
                  << (result.all_pass ? "all checks passed" : "ASSERTION FAILURE") << ")\n";
        return result.exit_code;
    } catch (const bsdelab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bsdelab - exact BSDE experiments on finite scenario trees"};
    app.require_subcommand(1);

    const std::vector<std::string> experiments = {"solve",   "picard-diagnose", "linear-check",
                                                  "compare", "apriori-sweep",   "refine"};
    std::vector<CommonFlags> flags(experiments.size());
    for (std::size_t i = 0; i < experiments.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(experiments[i], experiments[i] + " experiment");
        attach_common(cmd, flags[i]);
    }

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "summarize a previous run's manifest");
    report->add_option("--out", report_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (report->parsed()) return bsdelab::report_manifest(report_dir, std::cout);
    for (std::size_t i = 0; i < experiments.size(); ++i)
        if (app.get_subcommand(experiments[i])->parsed()) return run_with(experiments[i], flags[i]);
    return 2;
}
