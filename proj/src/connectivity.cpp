#include "lmc/connectivity.hpp"

#include <algorithm>
#include <cmath>

namespace lmc {

std::vector<double> alpha_grid(size_t grid_size) {
    if (grid_size < 3) throw ConfigError("alpha grid needs at least 3 points");
    std::vector<double> alphas(grid_size);
    for (size_t i = 0; i < grid_size; ++i)
        alphas[i] = double(i) / double(grid_size - 1);
    alphas.front() = 0.0;
    alphas.back() = 1.0;
    return alphas;
}

namespace {

double eval_metric(const Network& net, const ParamVector& theta,
                   const DatasetSlice& data, MetricKind metric) {
    return metric == MetricKind::Loss ? net.loss(theta, data)
                                      : net.error_rate(theta, data);
}

}  // namespace

BarrierCurve barrier_curve(const Network& net, const ParamVector& theta1,
                           const ParamVector& theta2, const DatasetSlice& data,
                           size_t grid_size, MetricKind metric) {
    require_same_layout(theta1, theta2, "barrier_curve");
    BarrierCurve curve;
    curve.metric = metric;
    curve.alphas = alpha_grid(grid_size);
    curve.data_id = data.id();
    curve.endpoint_metric1 = eval_metric(net, theta1, data, metric);
    curve.endpoint_metric2 = eval_metric(net, theta2, data, metric);
    for (double a : curve.alphas) {
        double m;
        try {
            m = eval_metric(net, interpolate(theta1, theta2, a), data, metric);
        } catch (const NumericError& e) {
            throw NumericError("non-finite metric at alpha=" + std::to_string(a) +
                                   ": " + e.what(),
                               e.example_index);
        }
        curve.segment_metric.push_back(m);
        // delta-form mix: exact zero at the endpoints and for identical siblings
        double mix = a == 1.0 ? curve.endpoint_metric2
                              : curve.endpoint_metric1 +
                                    a * (curve.endpoint_metric2 -
                                         curve.endpoint_metric1);
        curve.barrier.push_back(m - mix);
    }
    return curve;
}

MaxBarrier max_barrier(const BarrierCurve& curve) {
    MaxBarrier best{curve.alphas.front(), curve.barrier.front()};
    for (size_t i = 1; i < curve.alphas.size(); ++i) {
        if (curve.barrier[i] > best.value) {  // ties keep the smallest alpha
            best.value = curve.barrier[i];
            best.alpha = curve.alphas[i];
        }
    }
    return best;
}

PredictedBarrier predicted_barrier(const Network& net, const ParamVector& theta1,
                                   const ParamVector& theta2,
                                   const DatasetSlice& data, size_t grid_size) {
    require_same_layout(theta1, theta2, "predicted_barrier");
    PredictedBarrier pred;
    pred.alphas = alpha_grid(grid_size);
    ParamVector delta = theta2 - theta1;
    pred.distance = norm(delta);
    pred.quad_form1 = net.quadratic_form(theta1, delta, delta, data);
    pred.quad_form2 = net.quadratic_form(theta2, delta, delta, data);
    pred.grad_norm1 = norm(net.gradient(theta1, data));
    pred.grad_norm2 = norm(net.gradient(theta2, data));
    pred.nonstationary = pred.grad_norm1 > kStationarityThreshold ||
                         pred.grad_norm2 > kStationarityThreshold;
    for (double a : pred.alphas)
        pred.predicted.push_back(a * (1.0 - a) / 2.0 *
                                 (a * pred.quad_form1 + (1.0 - a) * pred.quad_form2));
    return pred;
}

double predicted_barrier_simplified(const Network& net, const ParamVector& theta1,
                                    const ParamVector& theta2,
                                    const DatasetSlice& data) {
    require_same_layout(theta1, theta2, "predicted_barrier_simplified");
    ParamVector delta = theta2 - theta1;
    return net.quadratic_form(theta1, delta, delta, data) / 8.0;
}

LayerwiseCurve layerwise_barrier_curve(const Network& net, const ParamVector& theta1,
                                       const ParamVector& theta2,
                                       const DatasetSlice& data,
                                       const std::string& layer, size_t grid_size) {
    require_same_layout(theta1, theta2, "layerwise_barrier_curve");
    if (!theta1.layout()->has_layer(layer))
        throw ConfigError("unknown layer '" + layer + "'");
    LayerMask mask(theta1.layout(), {layer});
    ParamVector masked_delta = mask.apply(theta2 - theta1);

    LayerwiseCurve curve;
    curve.layer = layer;
    curve.alphas = alpha_grid(grid_size);
    double l1 = net.loss(theta1, data);
    double l2 = net.loss(theta2, data);
    for (double a : curve.alphas) {
        ParamVector to1 = theta1 + a * ParamVector(masked_delta);
        ParamVector to2 = theta2 - (1.0 - a) * ParamVector(masked_delta);
        double f1 = net.loss(to1, data);
        double f2 = net.loss(to2, data);
        curve.loss_2to1.push_back(f1);
        curve.loss_1to2.push_back(f2);
        curve.barrier.push_back((1.0 - a) * f1 + a * f2 -
                                ((1.0 - a) * l1 + a * l2));
    }
    return curve;
}

double layerwise_predicted(const Network& net, const ParamVector& theta1,
                           const ParamVector& theta2, const DatasetSlice& data,
                           const LayerMask& layer_set, double alpha) {
    if (layer_set.layer_set().empty())
        throw ConfigError("layerwise prediction needs a nonempty layer set");
    require_same_layout(theta1, theta2, "layerwise_predicted");
    ParamVector m = layer_set.apply(theta2 - theta1);
    double q1 = net.quadratic_form(theta1, m, m, data);
    double q2 = net.quadratic_form(theta2, m, m, data);
    return alpha * (1.0 - alpha) / 2.0 * (alpha * q1 + (1.0 - alpha) * q2);
}

LayerBlockReport cross_block_matrix(const Network& net, const ParamVector& theta1,
                                    const ParamVector& theta2,
                                    const DatasetSlice& data, bool single_endpoint) {
    require_same_layout(theta1, theta2, "cross_block_matrix");
    const auto layout = theta1.layout();
    ParamVector delta = theta2 - theta1;

    LayerBlockReport report;
    report.layers = layout->layer_names();
    size_t L = report.layers.size();

    std::vector<ParamVector> masked(L);
    std::vector<ParamVector> havg(L);
    for (size_t l = 0; l < L; ++l) {
        LayerMask mask(layout, {report.layers[l]});
        masked[l] = mask.apply(delta);
        report.delta_norms.push_back(norm(masked[l]));
        ParamVector h = net.hvp(theta1, masked[l], data);
        if (!single_endpoint) {
            ParamVector h2 = net.hvp(theta2, masked[l], data);
            h += h2;
            h *= 0.5;
        }
        havg[l] = std::move(h);
    }

    report.blocks.assign(L, std::vector<double>(L, 0.0));
    for (size_t l = 0; l < L; ++l)
        for (size_t lp = 0; lp < L; ++lp) {
            report.blocks[l][lp] = dot(masked[l], havg[lp]) / 8.0;
            report.block_sum += report.blocks[l][lp];
        }

    double q1 = net.quadratic_form(theta1, delta, delta, data);
    double q2 = single_endpoint ? q1 : net.quadratic_form(theta2, delta, delta, data);
    report.full_predicted = (0.5 * q1 + 0.5 * q2) / 8.0;
    return report;
}

namespace {

std::optional<double> cosine(const ParamVector& a, const ParamVector& b) {
    double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    if (a.values() == b.values()) return 1.0;  // self-similarity is exact
    double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::optional<double> angle_deg(const ParamVector& a, const ParamVector& b) {
    auto c = cosine(a, b);
    if (!c) return std::nullopt;
    return std::acos(*c) * 180.0 / 3.14159265358979323846;
}

}  // namespace

GeometryReport sibling_geometry(const ForkedRun& run) {
    if (run.child1.checkpoints.empty() || run.child2.checkpoints.empty())
        throw ConfigError("sibling geometry needs child checkpoints");
    GeometryReport report;

    const ParamVector& s1 = run.solution1();
    const ParamVector& s2 = run.solution2();
    const ParamVector& fork_pt = run.fork_point();
    ParamVector origin = ParamVector::zeros(s1.layout());

    report.angle_origin_deg = angle_deg(s1 - origin, s2 - origin);
    report.angle_fork_deg = angle_deg(s1 - fork_pt, s2 - fork_pt);

    ParamVector final_diff = s1 - s2;
    for (const auto& [epoch, c1] : run.child1.checkpoints) {
        auto it = run.child2.checkpoints.find(epoch);
        if (it == run.child2.checkpoints.end()) continue;
        ParamVector diff = c1 - it->second;
        report.epochs.push_back(epoch);
        report.distance_trace.push_back(norm(diff));
        report.plane_cosine_trace.push_back(cosine(diff, final_diff));
    }
    return report;
}

}  // namespace lmc
