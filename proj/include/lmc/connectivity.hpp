#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmc/network.hpp"
#include "lmc/param_vector.hpp"
#include "lmc/trainer.hpp"

namespace lmc {

enum class MetricKind { Loss, ErrorRate };

// Endpoint gradient norms above this put a prediction outside the
// stationarity assumptions the quadratic model relies on.
constexpr double kStationarityThreshold = 1e-2;

// Default odd grid size so alpha = 1/2 is always on-grid.
constexpr size_t kDefaultGrid = 25;

std::vector<double> alpha_grid(size_t grid_size);

struct BarrierCurve {
    std::vector<double> alphas;
    std::vector<double> segment_metric;  // metric at each interpolate
    std::vector<double> barrier;         // metric minus linear endpoint mix
    MetricKind metric = MetricKind::Loss;
    double endpoint_metric1 = 0.0, endpoint_metric2 = 0.0;
    uint64_t data_id = 0;
};

struct MaxBarrier {
    double alpha = 0.0;
    double value = 0.0;
};

struct PredictedBarrier {
    std::vector<double> alphas;
    std::vector<double> predicted;
    double quad_form1 = 0.0;  // d^T H(theta1) d
    double quad_form2 = 0.0;  // d^T H(theta2) d
    double distance = 0.0;    // ||theta2 - theta1||
    double grad_norm1 = 0.0, grad_norm2 = 0.0;
    bool nonstationary = false;
};

struct LayerwiseCurve {
    std::string layer;
    std::vector<double> alphas;
    std::vector<double> loss_2to1;  // L(theta1 + a P d)
    std::vector<double> loss_1to2;  // L(theta2 - (1-a) P d)
    std::vector<double> barrier;    // B_layer(a)
};

struct LayerBlockReport {
    std::vector<std::string> layers;
    std::vector<std::vector<double>> blocks;  // blocks[l][l'] at alpha = 1/2
    std::vector<double> delta_norms;          // ||d[layer]|| per layer
    double block_sum = 0.0;
    double full_predicted = 0.0;  // full-network prediction at alpha = 1/2
};

struct GeometryReport {
    std::optional<double> angle_origin_deg;
    std::optional<double> angle_fork_deg;
    std::vector<int> epochs;
    std::vector<std::optional<double>> plane_cosine_trace;
    std::vector<double> distance_trace;
};

BarrierCurve barrier_curve(const Network& net, const ParamVector& theta1,
                           const ParamVector& theta2, const DatasetSlice& data,
                           size_t grid_size = kDefaultGrid,
                           MetricKind metric = MetricKind::Loss);

MaxBarrier max_barrier(const BarrierCurve& curve);

PredictedBarrier predicted_barrier(const Network& net, const ParamVector& theta1,
                                   const ParamVector& theta2,
                                   const DatasetSlice& data,
                                   size_t grid_size = kDefaultGrid);

// Aligned-curvature approximation: (1/8) d^T H(theta1) d, the alpha = 1/2
// summary of the simplified curve.
double predicted_barrier_simplified(const Network& net, const ParamVector& theta1,
                                    const ParamVector& theta2,
                                    const DatasetSlice& data);

LayerwiseCurve layerwise_barrier_curve(const Network& net, const ParamVector& theta1,
                                       const ParamVector& theta2,
                                       const DatasetSlice& data,
                                       const std::string& layer,
                                       size_t grid_size = kDefaultGrid);

double layerwise_predicted(const Network& net, const ParamVector& theta1,
                           const ParamVector& theta2, const DatasetSlice& data,
                           const LayerMask& layer_set, double alpha);

// When single_endpoint is set the Hessian at theta1 is used alone instead of
// the average of both endpoint Hessians.
LayerBlockReport cross_block_matrix(const Network& net, const ParamVector& theta1,
                                    const ParamVector& theta2,
                                    const DatasetSlice& data,
                                    bool single_endpoint = false);

GeometryReport sibling_geometry(const ForkedRun& run);

}  // namespace lmc
