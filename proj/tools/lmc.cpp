#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lmc/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::optional<uint64_t> seed_override;
    bool overwrite = false;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "experiment config JSON")->required();
    cmd->add_option("--out", opts.out, "output directory")->required();
    cmd->add_option("--seed-override", opts.seed_override,
                    "override the training seed from the config");
    cmd->add_flag("--overwrite", opts.overwrite, "overwrite a partial prior run");
    cmd->add_flag("--resume", opts.resume, "recompute over a partial prior run");
}

int run(const CommonOpts& opts, const lmc::StageSelection& stages) {
    try {
        auto cfg = lmc::ExperimentConfig::from_file(opts.config);
        auto result = lmc::run_experiment(cfg, opts.out,
                                          opts.overwrite || opts.resume,
                                          opts.seed_override, stages);
        std::cout << "run dir:     " << result.dir.string() << "\n"
                  << "config hash: " << result.config_hash << "\n"
                  << "run hash:    " << result.run_hash << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

lmc::StageSelection train_only() {
    lmc::StageSelection s;
    s.barrier = s.predict = s.layerwise = s.geometry = s.evolution = s.toy = false;
    return s;
}

lmc::StageSelection train_plus(bool lmc::StageSelection::* flag) {
    lmc::StageSelection s = train_only();
    s.*flag = true;
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear mode connectivity experiment driver"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* desc;
        lmc::StageSelection stages;
    };
    const Sub subs[] = {
        {"train", "train the parent trajectory and forks, no analysis",
         train_only()},
        {"fork", "run the fork protocol from the config, no analysis",
         train_only()},
        {"barrier", "forks plus barrier curves", train_plus(&lmc::StageSelection::barrier)},
        {"predict", "forks plus quadratic barrier predictions",
         train_plus(&lmc::StageSelection::predict)},
        {"layerwise", "forks plus layerwise/block decompositions",
         train_plus(&lmc::StageSelection::layerwise)},
        {"geometry", "forks plus sibling-geometry diagnostics",
         train_plus(&lmc::StageSelection::geometry)},
        {"toy", "toy landscape traces and barriers only",
         lmc::StageSelection::only_toy()},
        {"report", "full pipeline: train, analyze, export everything",
         lmc::StageSelection::all()},
    };

    CommonOpts opts[std::size(subs)];
    for (size_t i = 0; i < std::size(subs); ++i) {
        auto* cmd = app.add_subcommand(subs[i].name, subs[i].desc);
        add_common(cmd, opts[i]);
    }

    CLI11_PARSE(app, argc, argv);

    for (size_t i = 0; i < std::size(subs); ++i)
        if (app.got_subcommand(subs[i].name)) return run(opts[i], subs[i].stages);
    return 1;
}
