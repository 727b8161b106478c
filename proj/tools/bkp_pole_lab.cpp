#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lab/commands.hpp"
#include "lab/config.hpp"

int main(int argc, char **argv)
{
    CLI::App app{"Pole dynamics of elliptic BKP solutions: simulation and numerical checks"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;

    for (const char *name : {"simulate", "verify-identities", "spectral-scan", "check-linear-problem"}) {
        CLI::App *sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "random seed (overrides seed)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : lab::exit_bad_config;
    }

    lab::RunConfig cfg;
    try {
        cfg = lab::load_config(config_path);
    } catch (const lab::config_error &e) {
        std::cerr << "bkp-pole-lab: invalid config: " << e.what() << "\n";
        return lab::exit_bad_config;
    }
    if (out_dir) {
        cfg.output_dir = *out_dir;
    }
    if (seed) {
        cfg.seed = *seed;
    }
    return lab::run_command(app.get_subcommands().front()->get_name(), cfg);
}
