#include "lmc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "lmc/hash.hpp"

namespace lmc {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (lr < 0.0) throw ConfigError("lr must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (lr_decay_factor <= 0.0) throw ConfigError("lr_decay_factor must be > 0");
    for (size_t i = 0; i < lr_decay_epochs.size(); ++i) {
        int e = lr_decay_epochs[i];
        if (e < 0 || e >= std::max(epochs, 1))
            throw ConfigError("lr_decay_epochs must lie in [0, epochs)");
        if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1])
            throw ConfigError("lr_decay_epochs must be strictly increasing");
    }
}

double TrainConfig::lr_at(int epoch) const {
    double cur = lr;
    for (int e : lr_decay_epochs)
        if (e <= epoch) cur /= lr_decay_factor;
    return cur;
}

void ForkSpec::validate(const TrainConfig& parent) const {
    if (fork_epoch < 0 || fork_epoch > parent.epochs)
        throw ConfigError("fork_epoch must lie in [0, parent epochs]");
    if (child_epochs < 1) throw ConfigError("child_epochs must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (child_seeds[0] == child_seeds[1] && !allow_equal_seeds)
        throw ConfigError("child seeds must differ (or set allow_equal_seeds)");
}

namespace {

TrainResult train_impl(const Network& net, const ParamVector& init,
                       const DatasetSlice& data, const TrainConfig& cfg,
                       int checkpoint_every, int epoch_offset) {
    // callers validate the full-horizon config; sub-runs (parent truncated at
    // the fork, children on the global epoch clock) would fail a re-check of
    // lr_decay_epochs against their shorter epoch count
    init.check_finite();
    TrainResult result;
    ParamVector theta = init;
    ParamVector velocity = ParamVector::zeros(init.layout());
    result.checkpoints.emplace(0, theta);

    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        int global_epoch = epoch_offset + epoch;
        double lr = cfg.lr_at(global_epoch);
        std::mt19937_64 rng(mix_seed(cfg.seed, uint64_t(global_epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        size_t nbatches = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
        for (size_t b = 0; b < nbatches; ++b) {
            size_t lo = b * cfg.batch_size;
            size_t hi = std::min(lo + cfg.batch_size, data.size());
            std::span<const size_t> batch(order.data() + lo, hi - lo);
            double batch_loss = 0.0;
            ParamVector grad;
            try {
                grad = net.gradient_batch(theta, data, batch, &batch_loss);
            } catch (const NumericError& e) {
                throw DivergenceError("training diverged at epoch " +
                                          std::to_string(epoch) + " batch " +
                                          std::to_string(b) + ": " + e.what(),
                                      epoch, long(b));
            }
            for (size_t i = 0; i < theta.size(); ++i) {
                double g = grad[i] + cfg.weight_decay * theta[i];
                velocity[i] = cfg.momentum * velocity[i] + g;
                theta[i] -= lr * velocity[i];
            }
        }
        int done = epoch + 1;
        if (done % checkpoint_every == 0 || done == cfg.epochs)
            result.checkpoints.insert_or_assign(done, theta);
    }
    result.final_grad_norm = norm(net.gradient(theta, data));
    result.final_loss = net.loss(theta, data);
    return result;
}

}  // namespace

TrainResult train(const Network& net, const ParamVector& init,
                  const DatasetSlice& data, const TrainConfig& cfg,
                  int checkpoint_every) {
    cfg.validate();
    return train_impl(net, init, data, cfg, checkpoint_every, 0);
}

ForkedRun fork_and_train(const Network& net, const ParamVector& init,
                         const DatasetSlice& data, const TrainConfig& cfg,
                         const ForkSpec& fork) {
    cfg.validate();
    fork.validate(cfg);

    ForkedRun run;
    run.config = cfg;
    run.fork = fork;

    TrainConfig parent_cfg = cfg;
    parent_cfg.epochs = fork.fork_epoch;
    run.parent = train_impl(net, init, data, parent_cfg, 1, 0);

    const ParamVector& fork_point = run.parent.checkpoints.at(fork.fork_epoch);
    TrainConfig child_cfg = cfg;
    child_cfg.epochs = fork.child_epochs;
    child_cfg.seed = fork.child_seeds[0];
    run.child1 = train_impl(net, fork_point, data, child_cfg, fork.checkpoint_every,
                            fork.fork_epoch);
    child_cfg.seed = fork.child_seeds[1];
    run.child2 = train_impl(net, fork_point, data, child_cfg, fork.checkpoint_every,
                            fork.fork_epoch);
    return run;
}

namespace {
constexpr char kMagic[4] = {'L', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& theta) {
    std::string buf;
    auto put = [&](const void* p, size_t n) {
        buf.append(static_cast<const char*>(p), n);
    };
    put(kMagic, 4);
    put(&kVersion, 4);
    const auto& segs = theta.layout()->segments();
    uint32_t nseg = uint32_t(segs.size());
    put(&nseg, 4);
    for (const auto& s : segs) {
        uint32_t len = uint32_t(s.name.size());
        put(&len, 4);
        put(s.name.data(), len);
        uint64_t start = s.start, length = s.length;
        put(&start, 8);
        put(&length, 8);
    }
    uint64_t total = theta.size();
    put(&total, 8);
    put(theta.values().data(), theta.size() * sizeof(double));
    uint64_t checksum = fnv1a(buf);
    put(&checksum, 8);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

ParamVector load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > buf.size())
            throw TruncationError("checkpoint truncated at byte " +
                                  std::to_string(pos) + " in " + path);
    };
    auto get = [&](void* p, size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    };

    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("bad checkpoint magic in " + path, 0);
    uint32_t version = 0;
    get(&version, 4);
    if (version != kVersion)
        throw VersionError("unsupported checkpoint version " +
                           std::to_string(version) + " in " + path);
    uint32_t nseg = 0;
    get(&nseg, 4);
    std::vector<LayerSegment> segs;
    for (uint32_t i = 0; i < nseg; ++i) {
        uint32_t len = 0;
        get(&len, 4);
        need(len);
        std::string name(buf.data() + pos, len);
        pos += len;
        uint64_t start = 0, length = 0;
        get(&start, 8);
        get(&length, 8);
        segs.push_back({std::move(name), size_t(start), size_t(length)});
    }
    uint64_t total = 0;
    get(&total, 8);
    std::vector<double> values(total);
    get(values.data(), total * sizeof(double));

    // checksum covers everything before it
    uint64_t expect = fnv1a(buf.data(), pos);
    uint64_t stored = 0;
    get(&stored, 8);
    if (stored != expect)
        throw ChecksumError("checkpoint checksum mismatch in " + path);

    auto layout = std::make_shared<LayerLayout>(std::move(segs));
    return ParamVector(std::move(layout), std::move(values));
}

}  // namespace lmc
