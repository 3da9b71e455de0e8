#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cmc/cli_io.hpp"
#include "cmc/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Coupled Markov chain credit model: estimation, scenario "
                 "simulation, CDX tranche pricing and mean-CVaR portfolio "
                 "optimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    for (const std::string name : {"estimate", "simulate", "price", "optimize", "frontier"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--seed", seed, "seed override for this stage")
            ->each([&](const std::string&) { seed_given = true; });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    cmc::RunConfig config;
    try {
        config = cmc::load_config(config_path);
    } catch (const cmc::Error& e) {
        std::cerr << "CONFIG_ERROR: " << e.what() << "\n";
        return 2;
    }
    if (!out_dir.empty())
        config.output_dir = out_dir;
    if (seed_given) {
        if (command == "estimate")
            config.optimizer.seed = seed;
        else
            config.sim_seed = seed;
    }
    return cmc::run(command, config);
}
