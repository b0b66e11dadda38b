#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmc/connectivity.hpp"
#include "lmc/network.hpp"
#include "lmc/toyscape.hpp"
#include "lmc/trainer.hpp"

namespace lmc {

struct AnalysisConfig {
    size_t grid_size = kDefaultGrid;
    bool barrier_loss = true;
    bool barrier_error = false;
    std::vector<std::string> layerwise;  // layer names; "*" expands to all
    bool cross_blocks = false;
    bool geometry = true;
    int curve_evolution_stride = 0;  // 0 disables
    bool svg = false;
};

struct ToyConfig {
    std::vector<double> minima;
    std::vector<double> curvature_scales;
    size_t grid_size = 1001;
};

struct ExperimentConfig {
    std::string dataset;  // descriptor; empty for toy-only configs
    Shape input{1, 1, 1};
    std::vector<LayerSpec> net_layers;
    LossKind loss = LossKind::CrossEntropy;
    uint64_t init_seed = 0;
    TrainConfig train;
    std::vector<ForkSpec> forks;
    AnalysisConfig analysis;
    std::optional<ToyConfig> toy;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;  // canonical (sorted keys on dump)

    Network make_network() const;
};

// Which pipeline stages a CLI subcommand wants.
struct StageSelection {
    bool train = true;
    bool barrier = true;
    bool predict = true;
    bool layerwise = true;
    bool geometry = true;
    bool toy = true;
    bool evolution = true;
    static StageSelection all() { return {}; }
    static StageSelection only_toy() { return {false, false, false, false, false, true, false}; }
};

struct RunResult {
    std::filesystem::path dir;
    std::string config_hash;
    std::string run_hash;
};

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         bool overwrite = false,
                         std::optional<uint64_t> seed_override = std::nullopt,
                         const StageSelection& stages = StageSelection::all());

// Per-fork comparison row (Fig-4a-style table), sorted by fork epoch.
struct PredictedActualRow {
    int fork_epoch = 0;
    double actual_max = 0.0;
    double actual_argmax_alpha = 0.0;
    double predicted_half = 0.0;
    double quad_form1 = 0.0, quad_form2 = 0.0;
    double grad_norm1 = 0.0, grad_norm2 = 0.0;
    double distance = 0.0;
    bool nonstationary = false;
};

std::vector<PredictedActualRow> compare_predicted_actual(
    const Network& net, const std::vector<ForkedRun>& runs,
    const DatasetSlice& data, size_t grid_size = kDefaultGrid);

// Barrier curve between in-training siblings at sampled child epochs
// (first, first+stride, ..., last). Rows: (epoch, alpha, metric, barrier).
struct EvolutionRow {
    int epoch = 0;
    double alpha = 0.0;
    double metric = 0.0;
    double barrier = 0.0;
};

std::vector<EvolutionRow> curve_evolution(const Network& net, const ForkedRun& run,
                                          const DatasetSlice& data, int stride,
                                          MetricKind metric,
                                          size_t grid_size = kDefaultGrid);

// Small-multiples polyline SVG of evolution rows; pure convenience output.
void write_evolution_svg(const std::string& path,
                         const std::vector<EvolutionRow>& rows);

}  // namespace lmc
