#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lmc/dataset.hpp"
#include "lmc/network.hpp"
#include "lmc/param_vector.hpp"

namespace lmc {

struct TrainConfig {
    int epochs = 20;
    size_t batch_size = 128;
    double lr = 0.1;
    std::vector<int> lr_decay_epochs;  // strictly increasing, in [0, epochs)
    double lr_decay_factor = 10.0;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    uint64_t seed = 0;

    void validate() const;
    // lr after applying every decay at or before `epoch`
    double lr_at(int epoch) const;
};

struct ForkSpec {
    int fork_epoch = 0;
    uint64_t child_seeds[2] = {1, 2};
    int child_epochs = 30;
    int checkpoint_every = 1;
    bool allow_equal_seeds = false;

    void validate(const TrainConfig& parent) const;
};

using Trajectory = std::map<int, ParamVector>;  // epoch -> checkpoint

struct TrainResult {
    Trajectory checkpoints;  // includes epoch 0 (init) and the final epoch
    double final_grad_norm = 0.0;
    double final_loss = 0.0;
};

struct ForkedRun {
    TrainResult parent;
    TrainResult child1, child2;
    TrainConfig config;
    ForkSpec fork;

    const ParamVector& fork_point() const { return parent.checkpoints.at(fork.fork_epoch); }
    const ParamVector& solution1() const { return child1.checkpoints.rbegin()->second; }
    const ParamVector& solution2() const { return child2.checkpoints.rbegin()->second; }
};

// SGD with momentum and L2 weight decay; per-epoch shuffle is derived from
// (seed, epoch) only, so trajectories replay exactly.
TrainResult train(const Network& net, const ParamVector& init,
                  const DatasetSlice& data, const TrainConfig& cfg,
                  int checkpoint_every = 1);

// Parent to fork_epoch, then two children with identical hyperparameters and
// different shuffle seeds.
ForkedRun fork_and_train(const Network& net, const ParamVector& init,
                         const DatasetSlice& data, const TrainConfig& cfg,
                         const ForkSpec& fork);

// Versioned binary checkpoint: magic, version, layout table, little-endian
// f64 payload, trailing FNV-1a checksum.
void save_checkpoint(const std::string& path, const ParamVector& theta);
ParamVector load_checkpoint(const std::string& path);

}  // namespace lmc
