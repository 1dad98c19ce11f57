// antidote-sim: runs a defense x attacker grid of seeded poisoning trials
// and prints the result table as CSV.

#include <iostream>

#include <CLI11.hpp>

#include "antidote/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"DNS poisoning simulation grid"};

    std::string config_path;
    std::int64_t trials = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;

    app.add_option("--config", config_path, "Experiment config file (antidote-sim v1)");
    app.add_option("--trials", trials, "Trials per cell (overrides config)");
    app.add_option("--seed", seed, "Base seed (overrides config)")->each([&](const std::string&) {
        seed_set = true;
    });

    CLI11_PARSE(app, argc, argv);

    try {
        antidote::sim::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = antidote::sim::load_experiment_config(config_path);
        if (trials > 0) cfg.trials = trials;
        if (seed_set) cfg.base_seed = seed;

        auto table = antidote::sim::run_experiment(cfg);
        std::cout << antidote::sim::csv_header() << "\n";
        for (const auto& cell : table) std::cout << antidote::sim::csv_row(cell) << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
