#include "stopvest/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Optimal investment with stopping: dual obstacle solver and Monte Carlo check"};
    std::string mode;
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    app.add_option("mode", mode, "solve, verify, mc or all")->required()->check(CLI::IsMember({"solve", "verify", "mc", "all"}));
    app.add_option("--config", config, "JSON run configuration")->required();
    app.add_option("--out", out, "output directory (overrides the config)");
    app.add_option("--seed", seed, "Monte Carlo seed (overrides the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return stopvest::run_command(mode, config, out, seed, std::cout, std::cerr);
}
