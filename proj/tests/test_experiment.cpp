#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lmc/experiment.hpp"
#include "lmc/hash.hpp"

using namespace lmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("lmc_exp_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_config() {
    json j = {
        {"dataset", "two_gaussians:n=32,seed=5"},
        {"network",
         {{"input", {2}},
          {"loss", "cross_entropy"},
          {"layers",
           {{{"kind", "dense"}, {"units", 6}},
            {{"kind", "relu"}},
            {{"kind", "dense"}, {"units", 2}}}}}},
        {"init_seed", 1},
        {"train",
         {{"epochs", 4},
          {"batch_size", 8},
          {"lr", 0.05},
          {"momentum", 0.9},
          {"weight_decay", 0.0001},
          {"seed", 7}}},
        {"forks",
         {{{"fork_epoch", 0}, {"child_seeds", {11, 22}}, {"child_epochs", 3}},
          {{"fork_epoch", 2}, {"child_seeds", {11, 22}}, {"child_epochs", 3}}}},
        {"analysis",
         {{"grid_size", 9},
          {"barrier_error", true},
          {"layerwise", {"fc1"}},
          {"cross_blocks", true},
          {"curve_evolution_stride", 1}}},
    };
    return ExperimentConfig::from_json(j);
}

}  // namespace

TEST_CASE("config round-trips canonically") {
    auto cfg = tiny_config();
    auto j1 = cfg.to_json();
    auto cfg2 = ExperimentConfig::from_json(j1);
    CHECK(cfg2.to_json().dump() == j1.dump());
    CHECK(fnv1a(j1.dump()) == fnv1a(cfg2.to_json().dump()));
}

TEST_CASE("toy-only config produces toy CSVs and no checkpoints") {
    ExperimentConfig cfg;
    cfg.toy = ToyConfig{{-1.5, -1.0, 1.0, 1.5}, {}, 101};
    auto dir = fresh_dir("toy");
    auto result = run_experiment(cfg, dir.string());
    CHECK(fs::exists(dir / "toy_landscape.csv"));
    CHECK(fs::exists(dir / "toy_barriers.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
    for (const auto& e : fs::recursive_directory_iterator(dir))
        CHECK(e.path().extension() != ".bin");
    CHECK(!result.run_hash.empty());
}

TEST_CASE("two-fork run: outputs, ordering, determinism") {
    auto cfg = tiny_config();
    auto dir1 = fresh_dir("run1");
    auto r1 = run_experiment(cfg, dir1.string());

    CHECK(fs::exists(dir1 / "fork_0" / "fork_point.bin"));
    CHECK(fs::exists(dir1 / "fork_2" / "child1" / "ck_3.bin"));
    CHECK(fs::exists(dir1 / "predicted_vs_actual.csv"));
    CHECK(fs::exists(dir1 / "barrier_fork0_loss.csv"));
    CHECK(fs::exists(dir1 / "barrier_fork2_error.csv"));
    CHECK(fs::exists(dir1 / "layerwise_fork0.csv"));
    CHECK(fs::exists(dir1 / "cross_blocks_fork2.csv"));
    CHECK(fs::exists(dir1 / "geometry_summary.csv"));
    CHECK(fs::exists(dir1 / "evolution_fork0_loss.csv"));

    // rows sorted by fork epoch ascending, and every row carries the run hash
    std::istringstream pv(slurp(dir1 / "predicted_vs_actual.csv"));
    std::string line;
    std::getline(pv, line);  // header
    int prev = -1;
    int rows = 0;
    while (std::getline(pv, line)) {
        CHECK(line.substr(0, r1.run_hash.size()) == r1.run_hash);
        auto c1 = line.find(',');
        int epoch = std::stoi(line.substr(c1 + 1));
        CHECK(epoch > prev);
        prev = epoch;
        ++rows;
    }
    CHECK(rows == 2);

    SUBCASE("re-run reproduces identical hashes and bytes") {
        auto dir2 = fresh_dir("run2");
        auto r2 = run_experiment(cfg, dir2.string());
        CHECK(r1.run_hash == r2.run_hash);
        CHECK(slurp(dir1 / "predicted_vs_actual.csv") ==
              slurp(dir2 / "predicted_vs_actual.csv"));
        CHECK(slurp(dir1 / "fork_2" / "child1" / "ck_3.bin") ==
              slurp(dir2 / "fork_2" / "child1" / "ck_3.bin"));
        json m1 = json::parse(slurp(dir1 / "manifest.json"));
        json m2 = json::parse(slurp(dir2 / "manifest.json"));
        CHECK(m1["results"] == m2["results"]);
        CHECK(m1["run_hash"] == m2["run_hash"]);
    }

    SUBCASE("seed override changes the run hash") {
        auto dir3 = fresh_dir("run3");
        auto r3 = run_experiment(cfg, dir3.string(), false, uint64_t{99});
        CHECK(r3.run_hash != r1.run_hash);
    }
}

TEST_CASE("partial prior run is refused without overwrite") {
    auto dir = fresh_dir("partial");
    fs::create_directories(dir);
    std::ofstream(dir / "stray.txt") << "leftover";
    ExperimentConfig cfg;
    cfg.toy = ToyConfig{{-1.0, 1.0}, {}, 51};
    CHECK_THROWS_AS(run_experiment(cfg, dir.string()), ConfigError);
    CHECK_NOTHROW(run_experiment(cfg, dir.string(), true));
    // a completed run (manifest present) can be re-run without flags
    CHECK_NOTHROW(run_experiment(cfg, dir.string()));
}

TEST_CASE("identical children: evolution rows all zero barrier") {
    auto cfg = tiny_config();
    cfg.forks.clear();
    ForkSpec f;
    f.fork_epoch = 1;
    f.child_seeds[0] = f.child_seeds[1] = 5;
    f.allow_equal_seeds = true;
    f.child_epochs = 3;
    cfg.forks.push_back(f);

    auto data = load_dataset(cfg.dataset);
    auto net = cfg.make_network();
    auto run = fork_and_train(net, net.init_params(cfg.init_seed), data, cfg.train, f);

    auto rows = curve_evolution(net, run, data, 1, MetricKind::ErrorRate, 9);
    for (const auto& r : rows) CHECK(r.barrier == 0.0);

    SUBCASE("stride equal to total epochs keeps first and last") {
        auto sparse = curve_evolution(net, run, data, 3, MetricKind::Loss, 9);
        std::set<int> epochs;
        for (const auto& r : sparse) epochs.insert(r.epoch);
        CHECK(epochs == std::set<int>{0, 3});
    }
    SUBCASE("oversized stride throws") {
        CHECK_THROWS_AS(curve_evolution(net, run, data, 100, MetricKind::Loss, 9),
                        ConfigError);
    }
}

TEST_CASE("svg emission does not change CSV content") {
    auto cfg = tiny_config();
    cfg.forks.resize(1);
    auto dir1 = fresh_dir("svg_off");
    auto r1 = run_experiment(cfg, dir1.string());
    cfg.analysis.svg = true;
    auto dir2 = fresh_dir("svg_on");
    auto r2 = run_experiment(cfg, dir2.string());
    CHECK(r1.run_hash == r2.run_hash);
    CHECK(slurp(dir1 / "evolution_fork0_loss.csv") ==
          slurp(dir2 / "evolution_fork0_loss.csv"));
    CHECK(fs::exists(dir2 / "evolution_fork0_loss.svg"));
    CHECK(!fs::exists(dir1 / "evolution_fork0_loss.svg"));
}

TEST_CASE("config referencing an unknown layer is rejected") {
    auto cfg = tiny_config();
    cfg.analysis.layerwise = {"not_a_layer"};
    CHECK_THROWS_AS(cfg.make_network(), ConfigError);
}
