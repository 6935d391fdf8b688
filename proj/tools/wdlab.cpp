#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "wdlab/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"wdlab: deterministic weight-decay laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int jobs = 1;

    const char* names[] = {"train", "polish", "gf", "merge", "rank-sweep", "inspect",
                           "gen-data"};
    for (const char* name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory (default $WDLAB_OUT or .)");
        sub->add_option("--seed", seed, "override the config seed")
            ->each([&](const std::string&) { has_seed = true; });
        sub->add_option("--jobs", jobs, "worker threads for sweeps")
            ->check(CLI::PositiveNumber);
    }

    CLI11_PARSE(app, argc, argv);

    std::string command = app.get_subcommands().front()->get_name();
    return wdlab::experiments::run(command, config_path, out_dir,
                                   has_seed ? &seed : nullptr, jobs);
}
