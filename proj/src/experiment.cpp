#include "lmc/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lmc/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lmc {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

LossKind loss_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    if (s == "mse") return LossKind::MeanSquaredError;
    throw ConfigError("unknown loss kind '" + s + "'");
}

std::string loss_to_string(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

LayerSpec layer_from_json(const json& j) {
    std::string kind = j.at("kind");
    if (kind == "dense") {
        auto s = LayerSpec::dense(j.at("units").get<size_t>(),
                                  j.value("bias", true), j.value("name", ""));
        return s;
    }
    if (kind == "conv2d") {
        return LayerSpec::conv2d(j.at("channels").get<size_t>(),
                                 j.at("kernel").get<size_t>(), j.value("stride", 1),
                                 j.value("pad", 0), j.value("name", ""));
    }
    if (kind == "relu") return LayerSpec::relu();
    if (kind == "tanh") return LayerSpec::tanh_act();
    if (kind == "square") return LayerSpec::square();
    throw ConfigError("unknown layer kind '" + kind + "'");
}

json layer_to_json(const LayerSpec& s) {
    json j;
    switch (s.kind) {
        case LayerKind::Dense:
            j["kind"] = "dense";
            j["units"] = s.units;
            j["bias"] = s.bias;
            if (!s.name.empty()) j["name"] = s.name;
            break;
        case LayerKind::Conv2d:
            j["kind"] = "conv2d";
            j["channels"] = s.out_channels;
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            j["pad"] = s.pad;
            if (!s.name.empty()) j["name"] = s.name;
            break;
        case LayerKind::Relu:
            j["kind"] = "relu";
            break;
        case LayerKind::Tanh:
            j["kind"] = "tanh";
            break;
        case LayerKind::Square:
            j["kind"] = "square";
            break;
    }
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.dataset = j.value("dataset", "");
    if (j.contains("network")) {
        const auto& n = j.at("network");
        auto in = n.at("input").get<std::vector<size_t>>();
        if (in.size() == 1)
            cfg.input = Shape{in[0], 1, 1};
        else if (in.size() == 3)
            cfg.input = Shape{in[0], in[1], in[2]};
        else
            throw ConfigError("network.input must have 1 or 3 dims");
        cfg.loss = loss_from_string(n.value("loss", "cross_entropy"));
        for (const auto& lj : n.at("layers")) cfg.net_layers.push_back(layer_from_json(lj));
    }
    cfg.init_seed = j.value("init_seed", uint64_t{0});
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.epochs = t.value("epochs", 20);
        cfg.train.batch_size = t.value("batch_size", size_t{128});
        cfg.train.lr = t.value("lr", 0.1);
        cfg.train.lr_decay_epochs = t.value("lr_decay_epochs", std::vector<int>{});
        cfg.train.lr_decay_factor = t.value("lr_decay_factor", 10.0);
        cfg.train.momentum = t.value("momentum", 0.9);
        cfg.train.weight_decay = t.value("weight_decay", 1e-4);
        cfg.train.seed = t.value("seed", uint64_t{0});
    }
    for (const auto& fj : j.value("forks", json::array())) {
        ForkSpec f;
        f.fork_epoch = fj.at("fork_epoch");
        auto seeds = fj.at("child_seeds").get<std::vector<uint64_t>>();
        if (seeds.size() != 2) throw ConfigError("child_seeds must have 2 entries");
        f.child_seeds[0] = seeds[0];
        f.child_seeds[1] = seeds[1];
        f.child_epochs = fj.value("child_epochs", 30);
        f.checkpoint_every = fj.value("checkpoint_every", 1);
        f.allow_equal_seeds = fj.value("allow_equal_seeds", false);
        cfg.forks.push_back(f);
    }
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        cfg.analysis.grid_size = a.value("grid_size", kDefaultGrid);
        cfg.analysis.barrier_loss = a.value("barrier_loss", true);
        cfg.analysis.barrier_error = a.value("barrier_error", false);
        cfg.analysis.layerwise = a.value("layerwise", std::vector<std::string>{});
        cfg.analysis.cross_blocks = a.value("cross_blocks", false);
        cfg.analysis.geometry = a.value("geometry", true);
        cfg.analysis.curve_evolution_stride = a.value("curve_evolution_stride", 0);
        cfg.analysis.svg = a.value("svg", false);
    }
    if (j.contains("toy")) {
        ToyConfig t;
        t.minima = j.at("toy").at("minima").get<std::vector<double>>();
        t.curvature_scales =
            j.at("toy").value("curvature_scales", std::vector<double>{});
        t.grid_size = j.at("toy").value("grid_size", size_t{1001});
        cfg.toy = t;
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config parse error: " + std::string(e.what()),
                         long(e.byte));
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    if (!dataset.empty()) j["dataset"] = dataset;
    if (!net_layers.empty()) {
        json n;
        n["input"] = std::vector<size_t>{input.c, input.h, input.w};
        n["loss"] = loss_to_string(loss);
        n["layers"] = json::array();
        for (const auto& l : net_layers) n["layers"].push_back(layer_to_json(l));
        j["network"] = n;
    }
    j["init_seed"] = init_seed;
    json t;
    t["epochs"] = train.epochs;
    t["batch_size"] = train.batch_size;
    t["lr"] = train.lr;
    t["lr_decay_epochs"] = train.lr_decay_epochs;
    t["lr_decay_factor"] = train.lr_decay_factor;
    t["momentum"] = train.momentum;
    t["weight_decay"] = train.weight_decay;
    t["seed"] = train.seed;
    j["train"] = t;
    j["forks"] = json::array();
    for (const auto& f : forks) {
        json fj;
        fj["fork_epoch"] = f.fork_epoch;
        fj["child_seeds"] = std::vector<uint64_t>{f.child_seeds[0], f.child_seeds[1]};
        fj["child_epochs"] = f.child_epochs;
        fj["checkpoint_every"] = f.checkpoint_every;
        if (f.allow_equal_seeds) fj["allow_equal_seeds"] = true;
        j["forks"].push_back(fj);
    }
    json a;
    a["grid_size"] = analysis.grid_size;
    a["barrier_loss"] = analysis.barrier_loss;
    a["barrier_error"] = analysis.barrier_error;
    a["layerwise"] = analysis.layerwise;
    a["cross_blocks"] = analysis.cross_blocks;
    a["geometry"] = analysis.geometry;
    a["curve_evolution_stride"] = analysis.curve_evolution_stride;
    // svg is a render-only switch and deliberately not part of the canonical
    // config (it must not change any result hash)
    j["analysis"] = a;
    if (toy) {
        json tj;
        tj["minima"] = toy->minima;
        if (!toy->curvature_scales.empty())
            tj["curvature_scales"] = toy->curvature_scales;
        tj["grid_size"] = toy->grid_size;
        j["toy"] = tj;
    }
    return j;
}

Network ExperimentConfig::make_network() const {
    if (net_layers.empty()) throw ConfigError("config has no network section");
    Network net(input, net_layers, loss);
    for (const auto& name : analysis.layerwise)
        if (name != "*" && !net.layout()->has_layer(name))
            throw ConfigError("analysis.layerwise references unknown layer '" +
                              name + "'");
    return net;
}

std::vector<PredictedActualRow> compare_predicted_actual(
    const Network& net, const std::vector<ForkedRun>& runs,
    const DatasetSlice& data, size_t grid_size) {
    std::vector<PredictedActualRow> rows;
    for (const auto& run : runs) {
        PredictedActualRow row;
        row.fork_epoch = run.fork.fork_epoch;
        auto curve = barrier_curve(net, run.solution1(), run.solution2(), data,
                                   grid_size, MetricKind::Loss);
        auto mb = max_barrier(curve);
        row.actual_max = mb.value;
        row.actual_argmax_alpha = mb.alpha;
        auto pred = predicted_barrier(net, run.solution1(), run.solution2(), data,
                                      grid_size);
        row.predicted_half = 0.125 * (0.5 * pred.quad_form1 + 0.5 * pred.quad_form2);
        row.quad_form1 = pred.quad_form1;
        row.quad_form2 = pred.quad_form2;
        row.grad_norm1 = pred.grad_norm1;
        row.grad_norm2 = pred.grad_norm2;
        row.distance = pred.distance;
        row.nonstationary = pred.nonstationary;
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.fork_epoch < b.fork_epoch; });
    return rows;
}

std::vector<EvolutionRow> curve_evolution(const Network& net, const ForkedRun& run,
                                          const DatasetSlice& data, int stride,
                                          MetricKind metric, size_t grid_size) {
    if (stride < 1) throw ConfigError("evolution stride must be >= 1");
    std::vector<int> epochs;
    for (const auto& [epoch, unused] : run.child1.checkpoints)
        if (run.child2.checkpoints.count(epoch)) epochs.push_back(epoch);
    if (epochs.empty()) throw ConfigError("run has no shared child checkpoints");
    int last = epochs.back();
    if (stride > last)
        throw ConfigError("evolution stride exceeds available epochs");
    std::vector<int> sampled;
    for (int e : epochs)
        if (e % stride == 0 || e == last) sampled.push_back(e);
    if (sampled.size() < 2)
        throw ConfigError("evolution stride exceeds available epochs");

    std::vector<EvolutionRow> rows;
    for (int e : sampled) {
        auto curve = barrier_curve(net, run.child1.checkpoints.at(e),
                                   run.child2.checkpoints.at(e), data, grid_size,
                                   metric);
        for (size_t i = 0; i < curve.alphas.size(); ++i)
            rows.push_back({e, curve.alphas[i], curve.segment_metric[i],
                            curve.barrier[i]});
    }
    return rows;
}

void write_evolution_svg(const std::string& path,
                         const std::vector<EvolutionRow>& rows) {
    // one panel per epoch, barrier vs alpha, shared y-scale
    std::map<int, std::vector<const EvolutionRow*>> panels;
    double lo = 0.0, hi = 0.0;
    for (const auto& r : rows) {
        panels[r.epoch].push_back(&r);
        lo = std::min(lo, r.barrier);
        hi = std::max(hi, r.barrier);
    }
    if (hi == lo) hi = lo + 1.0;
    const double pw = 160, ph = 120, margin = 20;
    double width = margin + panels.size() * (pw + margin);
    double height = ph + 2 * margin + 14;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write svg " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
        << "' height='" << height << "'>\n";
    size_t k = 0;
    for (const auto& [epoch, pts] : panels) {
        double x0 = margin + double(k) * (pw + margin);
        out << "<rect x='" << x0 << "' y='" << margin << "' width='" << pw
            << "' height='" << ph << "' fill='none' stroke='#999'/>\n";
        out << "<text x='" << x0 << "' y='" << margin + ph + 14
            << "' font-size='10'>t=" << epoch << "</text>\n";
        out << "<polyline fill='none' stroke='#1f77b4' points='";
        for (const auto* r : pts) {
            double x = x0 + r->alpha * pw;
            double y = margin + ph - (r->barrier - lo) / (hi - lo) * ph;
            out << x << "," << y << " ";
        }
        out << "'/>\n";
        ++k;
    }
    out << "</svg>\n";
}

namespace {

class CsvFile {
public:
    CsvFile(const fs::path& path, const std::string& header) : path_(path) {
        out_.open(path, std::ios::trunc);
        if (!out_) throw IoError("cannot write " + path.string());
        out_ << "run_hash," << header << "\n";
    }
    template <typename... Cols>
    void row(const std::string& run_hash, Cols&&... cols) {
        out_ << run_hash;
        ((out_ << "," << col(std::forward<Cols>(cols))), ...);
        out_ << "\n";
    }
    void close() { out_.close(); }
    const fs::path& path() const { return path_; }

private:
    static std::string col(double v) { return fmt(v); }
    static std::string col(int v) { return std::to_string(v); }
    static std::string col(size_t v) { return std::to_string(v); }
    static std::string col(bool v) { return v ? "1" : "0"; }
    static std::string col(const std::string& s) { return s; }
    static std::string col(const std::optional<double>& v) {
        return v ? fmt(*v) : "";
    }
    fs::path path_;
    std::ofstream out_;
};

uint64_t file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return fnv1a(bytes);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg_in, const std::string& out_dir,
                         bool overwrite, std::optional<uint64_t> seed_override,
                         const StageSelection& stages) {
    ExperimentConfig cfg = cfg_in;
    if (seed_override) cfg.train.seed = *seed_override;

    json config_json = cfg.to_json();
    std::string config_hash = hex_hash(fnv1a(config_json.dump()));

    fs::path dir(out_dir);
    if (fs::exists(dir) && !fs::is_empty(dir) && !fs::exists(dir / "manifest.json") &&
        !overwrite)
        throw ConfigError("output dir " + out_dir +
                          " holds a partial prior run; pass overwrite/resume");
    fs::create_directories(dir);

    json manifest;
    manifest["config"] = config_json;
    manifest["config_hash"] = config_hash;
    manifest["code_version"] = "1";

    std::vector<std::string> csv_files;

    // ---- toy landscapes -------------------------------------------------
    if (stages.toy && cfg.toy) {
        ToyLandscape land(cfg.toy->minima, cfg.toy->curvature_scales);
        double lo = land.minima().front() - 0.5;
        double hi = land.minima().back() + 0.5;
        CsvFile trace(dir / "toy_landscape.csv", "theta,loss");
        for (size_t i = 0; i < cfg.toy->grid_size; ++i) {
            double th = lo + (hi - lo) * double(i) / double(cfg.toy->grid_size - 1);
            trace.row(config_hash, th, land.loss(th));
        }
        trace.close();
        csv_files.push_back("toy_landscape.csv");

        CsvFile bar(dir / "toy_barriers.csv",
                    "i,j,theta_i,theta_j,alpha_star,actual,predicted");
        for (size_t i = 0; i < land.minima().size(); ++i)
            for (size_t j = i + 1; j < land.minima().size(); ++j) {
                auto b = toy_barrier(land, i, j, cfg.toy->grid_size);
                bar.row(config_hash, i, j, land.minima()[i], land.minima()[j],
                        b.alpha, b.value, toy_predicted_barrier(land, i, j));
            }
        bar.close();
        csv_files.push_back("toy_barriers.csv");
    }

    // ---- training + forks ----------------------------------------------
    std::vector<ForkedRun> runs;
    std::string run_hash = config_hash;
    std::optional<DatasetSlice> data;
    std::optional<Network> net;

    if (stages.train && !cfg.dataset.empty() && !cfg.net_layers.empty()) {
        data = load_dataset(cfg.dataset);
        net = cfg.make_network();
        manifest["dataset_id"] = hex_hash(data->id());
        ParamVector init = net->init_params(cfg.init_seed);

        Fnv1a run_digest;
        run_digest.update(config_hash);
        run_digest.update_pod(data->id());

        manifest["forks"] = json::array();
        for (const auto& fork : cfg.forks) {
            ForkedRun run = fork_and_train(*net, init, *data, cfg.train, fork);
            fs::path fdir = dir / ("fork_" + std::to_string(fork.fork_epoch));
            fs::create_directories(fdir / "child1");
            fs::create_directories(fdir / "child2");
            json fj;
            fj["fork_epoch"] = fork.fork_epoch;
            fj["final_grad_norms"] = {run.child1.final_grad_norm,
                                      run.child2.final_grad_norm};
            fj["final_losses"] = {run.child1.final_loss, run.child2.final_loss};
            json ckpts = json::array();
            auto save = [&](const fs::path& p, const ParamVector& theta) {
                save_checkpoint(p.string(), theta);
                uint64_t h = file_hash(p);
                run_digest.update_pod(h);
                ckpts.push_back({{"path", fs::relative(p, dir).string()},
                                 {"hash", hex_hash(h)}});
            };
            save(fdir / "fork_point.bin", run.fork_point());
            for (const auto& [epoch, theta] : run.child1.checkpoints)
                save(fdir / "child1" / ("ck_" + std::to_string(epoch) + ".bin"), theta);
            for (const auto& [epoch, theta] : run.child2.checkpoints)
                save(fdir / "child2" / ("ck_" + std::to_string(epoch) + ".bin"), theta);
            fj["checkpoints"] = ckpts;
            manifest["forks"].push_back(fj);
            runs.push_back(std::move(run));
        }
        run_hash = hex_hash(run_digest.digest());
    }
    manifest["run_hash"] = run_hash;

    // ---- analyses -------------------------------------------------------
    if (net && data && !runs.empty()) {
        const auto& A = cfg.analysis;
        std::vector<MetricKind> metrics;
        if (A.barrier_loss) metrics.push_back(MetricKind::Loss);
        if (A.barrier_error && net->loss_kind() == LossKind::CrossEntropy)
            metrics.push_back(MetricKind::ErrorRate);

        if (stages.barrier) {
            for (const auto& run : runs) {
                for (MetricKind m : metrics) {
                    std::string mname = m == MetricKind::Loss ? "loss" : "error";
                    std::string fname = "barrier_fork" +
                                        std::to_string(run.fork.fork_epoch) + "_" +
                                        mname + ".csv";
                    CsvFile f(dir / fname, "fork_epoch,alpha,metric,barrier");
                    auto curve = barrier_curve(*net, run.solution1(), run.solution2(),
                                               *data, A.grid_size, m);
                    for (size_t i = 0; i < curve.alphas.size(); ++i)
                        f.row(run_hash, run.fork.fork_epoch, curve.alphas[i],
                              curve.segment_metric[i], curve.barrier[i]);
                    f.close();
                    csv_files.push_back(fname);
                }
            }
        }

        if (stages.predict) {
            for (const auto& run : runs) {
                std::string fname =
                    "predicted_fork" + std::to_string(run.fork.fork_epoch) + ".csv";
                CsvFile f(dir / fname, "fork_epoch,alpha,predicted,nonstationary");
                auto pred = predicted_barrier(*net, run.solution1(), run.solution2(),
                                              *data, A.grid_size);
                for (size_t i = 0; i < pred.alphas.size(); ++i)
                    f.row(run_hash, run.fork.fork_epoch, pred.alphas[i],
                          pred.predicted[i], pred.nonstationary);
                f.close();
                csv_files.push_back(fname);
            }
            auto rows = compare_predicted_actual(*net, runs, *data, A.grid_size);
            CsvFile f(dir / "predicted_vs_actual.csv",
                      "fork_epoch,actual_max,actual_argmax_alpha,predicted_half,"
                      "quad_form1,quad_form2,grad_norm1,grad_norm2,distance,"
                      "nonstationary");
            for (const auto& r : rows)
                f.row(run_hash, r.fork_epoch, r.actual_max, r.actual_argmax_alpha,
                      r.predicted_half, r.quad_form1, r.quad_form2, r.grad_norm1,
                      r.grad_norm2, r.distance, r.nonstationary);
            f.close();
            csv_files.push_back("predicted_vs_actual.csv");
        }

        if (stages.layerwise && (!A.layerwise.empty() || A.cross_blocks)) {
            std::vector<std::string> layers = A.layerwise;
            if (std::find(layers.begin(), layers.end(), "*") != layers.end())
                layers = net->layout()->layer_names();
            for (const auto& run : runs) {
                std::string suffix = std::to_string(run.fork.fork_epoch);
                if (!layers.empty()) {
                    std::string fname = "layerwise_fork" + suffix + ".csv";
                    CsvFile f(dir / fname,
                              "fork_epoch,layer,alpha,loss_2to1,loss_1to2,barrier,"
                              "predicted");
                    for (const auto& layer : layers) {
                        auto curve = layerwise_barrier_curve(
                            *net, run.solution1(), run.solution2(), *data, layer,
                            A.grid_size);
                        LayerMask mask(net->layout(), {layer});
                        for (size_t i = 0; i < curve.alphas.size(); ++i) {
                            double predicted = layerwise_predicted(
                                *net, run.solution1(), run.solution2(), *data, mask,
                                curve.alphas[i]);
                            f.row(run_hash, run.fork.fork_epoch, layer,
                                  curve.alphas[i], curve.loss_2to1[i],
                                  curve.loss_1to2[i], curve.barrier[i], predicted);
                        }
                    }
                    f.close();
                    csv_files.push_back(fname);
                }
                if (A.cross_blocks) {
                    auto report = cross_block_matrix(*net, run.solution1(),
                                                     run.solution2(), *data);
                    std::string fname = "cross_blocks_fork" + suffix + ".csv";
                    CsvFile f(dir / fname,
                              "fork_epoch,layer,layer_prime,block,delta_norm_layer");
                    for (size_t l = 0; l < report.layers.size(); ++l)
                        for (size_t lp = 0; lp < report.layers.size(); ++lp)
                            f.row(run_hash, run.fork.fork_epoch, report.layers[l],
                                  report.layers[lp], report.blocks[l][lp],
                                  report.delta_norms[l]);
                    f.close();
                    csv_files.push_back(fname);
                }
            }
        }

        if (stages.geometry && cfg.analysis.geometry) {
            CsvFile summary(dir / "geometry_summary.csv",
                            "fork_epoch,angle_origin_deg,angle_fork_deg");
            for (const auto& run : runs) {
                auto geo = sibling_geometry(run);
                summary.row(run_hash, run.fork.fork_epoch, geo.angle_origin_deg,
                            geo.angle_fork_deg);
                std::string fname = "geometry_fork" +
                                    std::to_string(run.fork.fork_epoch) + ".csv";
                CsvFile f(dir / fname, "fork_epoch,child_epoch,plane_cosine,distance");
                for (size_t i = 0; i < geo.epochs.size(); ++i)
                    f.row(run_hash, run.fork.fork_epoch, geo.epochs[i],
                          geo.plane_cosine_trace[i], geo.distance_trace[i]);
                f.close();
                csv_files.push_back(fname);
            }
            summary.close();
            csv_files.push_back("geometry_summary.csv");
        }

        if (stages.evolution && A.curve_evolution_stride > 0) {
            for (const auto& run : runs) {
                for (MetricKind m : metrics) {
                    std::string mname = m == MetricKind::Loss ? "loss" : "error";
                    std::string fname = "evolution_fork" +
                                        std::to_string(run.fork.fork_epoch) + "_" +
                                        mname + ".csv";
                    auto rows = curve_evolution(*net, run, *data,
                                                A.curve_evolution_stride, m,
                                                A.grid_size);
                    CsvFile f(dir / fname, "fork_epoch,child_epoch,alpha,metric,barrier");
                    for (const auto& r : rows)
                        f.row(run_hash, run.fork.fork_epoch, r.epoch, r.alpha,
                              r.metric, r.barrier);
                    f.close();
                    csv_files.push_back(fname);
                    if (A.svg)
                        write_evolution_svg(
                            (dir / (fname.substr(0, fname.size() - 4) + ".svg"))
                                .string(),
                            rows);
                }
            }
        }
    }

    json results = json::object();
    for (const auto& name : csv_files)
        results[name] = hex_hash(file_hash(dir / name));
    manifest["results"] = results;

    // atomic manifest write
    fs::path tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << manifest.dump(2) << "\n";
    }
    fs::rename(tmp, dir / "manifest.json");

    return {dir, config_hash, run_hash};
}

}  // namespace lmc
