#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmc/dataset.hpp"
#include "lmc/param_vector.hpp"

namespace lmc {

enum class LayerKind { Dense, Conv2d, Relu, Tanh, Square };
enum class LossKind { CrossEntropy, MeanSquaredError };

struct Shape {
    size_t c = 1, h = 1, w = 1;
    size_t flat() const { return c * h * w; }
};

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::string name;  // parameterized layers only; auto-named when empty
    // dense
    size_t units = 0;
    bool bias = true;
    // conv2d
    size_t out_channels = 0;
    size_t kernel = 0;
    size_t stride = 1;
    size_t pad = 0;

    static LayerSpec dense(size_t units, bool bias = true, std::string name = "");
    static LayerSpec conv2d(size_t out_channels, size_t kernel, size_t stride = 1,
                            size_t pad = 0, std::string name = "");
    static LayerSpec relu() { return {LayerKind::Relu}; }
    static LayerSpec tanh_act() { return {LayerKind::Tanh}; }
    static LayerSpec square() { return {LayerKind::Square}; }
};

// Resolved per-layer bookkeeping (shapes and parameter offsets).
struct LayerInfo {
    LayerSpec spec;
    Shape in, out;
    size_t param_offset = 0;
    size_t param_count = 0;
};

// Small feed-forward network over flat parameters: forward pass, mean loss,
// reverse-mode gradient, and exact Hessian-vector products. All dataset
// reductions are sequential by example so results are bit-reproducible.
class Network {
public:
    Network(Shape input, std::vector<LayerSpec> layers, LossKind loss);

    const LayoutPtr& layout() const { return layout_; }
    LossKind loss_kind() const { return loss_; }
    size_t output_dim() const { return layers_.back().out.flat(); }
    const std::vector<LayerInfo>& layers() const { return layers_; }

    ParamVector init_params(uint64_t seed) const;

    std::vector<double> forward(const ParamVector& theta, const double* x) const;

    double loss(const ParamVector& theta, const DatasetSlice& data) const;
    double error_rate(const ParamVector& theta, const DatasetSlice& data) const;
    ParamVector gradient(const ParamVector& theta, const DatasetSlice& data) const;
    ParamVector hvp(const ParamVector& theta, const ParamVector& v,
                    const DatasetSlice& data) const;
    // u^T H(theta) v via one hvp and one inner product
    double quadratic_form(const ParamVector& theta, const ParamVector& u,
                          const ParamVector& v, const DatasetSlice& data) const;

    // mean loss and gradient over a subset of example indices (training batches)
    ParamVector gradient_batch(const ParamVector& theta, const DatasetSlice& data,
                               std::span<const size_t> indices,
                               double* loss_out = nullptr) const;

private:
    void check_theta(const ParamVector& theta) const;
    void check_data(const DatasetSlice& data) const;

    std::vector<LayerInfo> layers_;
    LayoutPtr layout_;
    LossKind loss_;
};

}  // namespace lmc
