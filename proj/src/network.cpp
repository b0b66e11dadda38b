#include "lmc/network.hpp"

#include <cmath>
#include <random>

#include "lmc/detail/dual.hpp"
#include "lmc/hash.hpp"

namespace lmc {

LayerSpec LayerSpec::dense(size_t units, bool bias, std::string name) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    s.bias = bias;
    s.name = std::move(name);
    return s;
}

LayerSpec LayerSpec::conv2d(size_t out_channels, size_t kernel, size_t stride,
                            size_t pad, std::string name) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    s.name = std::move(name);
    return s;
}

Network::Network(Shape input, std::vector<LayerSpec> layers, LossKind loss)
    : loss_(loss) {
    if (layers.empty()) throw ConfigError("network needs at least one layer");
    Shape cur = input;
    size_t offset = 0;
    int dense_ord = 0, conv_ord = 0;
    std::vector<LayerSegment> segments;
    for (auto& spec : layers) {
        LayerInfo info;
        info.spec = spec;
        info.in = cur;
        switch (spec.kind) {
            case LayerKind::Dense: {
                if (spec.units == 0) throw ConfigError("dense layer needs units");
                info.out = Shape{spec.units, 1, 1};
                info.param_count = spec.units * cur.flat() + (spec.bias ? spec.units : 0);
                if (info.spec.name.empty())
                    info.spec.name = "fc" + std::to_string(++dense_ord);
                else
                    ++dense_ord;
                break;
            }
            case LayerKind::Conv2d: {
                if (spec.out_channels == 0 || spec.kernel == 0)
                    throw ConfigError("conv layer needs channels and kernel");
                if (cur.h + 2 * spec.pad < spec.kernel ||
                    cur.w + 2 * spec.pad < spec.kernel)
                    throw ConfigError("conv kernel larger than padded input");
                size_t ho = (cur.h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
                size_t wo = (cur.w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
                info.out = Shape{spec.out_channels, ho, wo};
                info.param_count =
                    spec.out_channels * cur.c * spec.kernel * spec.kernel +
                    (spec.bias ? spec.out_channels : 0);
                if (info.spec.name.empty())
                    info.spec.name = "conv" + std::to_string(++conv_ord);
                else
                    ++conv_ord;
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Tanh:
            case LayerKind::Square:
                info.out = cur;
                info.param_count = 0;
                break;
        }
        info.param_offset = offset;
        if (info.param_count > 0)
            segments.push_back({info.spec.name, offset, info.param_count});
        offset += info.param_count;
        cur = info.out;
        layers_.push_back(std::move(info));
    }
    if (segments.empty()) throw ConfigError("network has no parameters");
    layout_ = std::make_shared<LayerLayout>(std::move(segments));
}

ParamVector Network::init_params(uint64_t seed) const {
    std::vector<double> v(layout_->total_params(), 0.0);
    std::mt19937_64 rng(mix_seed(seed, 0x1217));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& info : layers_) {
        if (info.param_count == 0) continue;
        size_t fan_in = info.in.flat();
        if (info.spec.kind == LayerKind::Conv2d)
            fan_in = info.in.c * info.spec.kernel * info.spec.kernel;
        double scale = std::sqrt(2.0 / double(fan_in));
        size_t weights = info.param_count - (info.spec.bias ? (info.spec.kind == LayerKind::Dense ? info.spec.units : info.spec.out_channels) : 0);
        for (size_t i = 0; i < weights; ++i)
            v[info.param_offset + i] = scale * gauss(rng);
        // biases stay zero
    }
    return ParamVector(layout_, std::move(v));
}

namespace {

using detail::Dual;
using detail::primal;

template <typename T>
void dense_forward(const LayerInfo& L, const T* p, const std::vector<T>& x,
                   std::vector<T>& y) {
    size_t I = L.in.flat(), O = L.out.flat();
    const T* w = p + L.param_offset;
    const T* b = L.spec.bias ? w + O * I : nullptr;
    y.assign(O, T(0.0));
    for (size_t o = 0; o < O; ++o) {
        T acc = b ? b[o] : T(0.0);
        const T* row = w + o * I;
        for (size_t i = 0; i < I; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

template <typename T>
void dense_backward(const LayerInfo& L, const T* p, const std::vector<T>& x,
                    const std::vector<T>& dy, std::vector<T>& dx, T* grad) {
    size_t I = L.in.flat(), O = L.out.flat();
    const T* w = p + L.param_offset;
    T* gw = grad + L.param_offset;
    T* gb = L.spec.bias ? gw + O * I : nullptr;
    dx.assign(I, T(0.0));
    for (size_t o = 0; o < O; ++o) {
        const T* row = w + o * I;
        T* grow = gw + o * I;
        const T g = dy[o];
        for (size_t i = 0; i < I; ++i) {
            grow[i] += g * x[i];
            dx[i] += row[i] * g;
        }
        if (gb) gb[o] += g;
    }
}

template <typename T>
void conv_forward(const LayerInfo& L, const T* p, const std::vector<T>& x,
                  std::vector<T>& y) {
    const size_t Ci = L.in.c, H = L.in.h, W = L.in.w;
    const size_t Co = L.out.c, Ho = L.out.h, Wo = L.out.w;
    const size_t K = L.spec.kernel, S = L.spec.stride, P = L.spec.pad;
    const T* w = p + L.param_offset;
    const T* b = L.spec.bias ? w + Co * Ci * K * K : nullptr;
    y.assign(Co * Ho * Wo, T(0.0));
    for (size_t co = 0; co < Co; ++co) {
        for (size_t oy = 0; oy < Ho; ++oy) {
            for (size_t ox = 0; ox < Wo; ++ox) {
                T acc = b ? b[co] : T(0.0);
                for (size_t ci = 0; ci < Ci; ++ci) {
                    for (size_t ky = 0; ky < K; ++ky) {
                        long iy = long(oy * S + ky) - long(P);
                        if (iy < 0 || iy >= long(H)) continue;
                        for (size_t kx = 0; kx < K; ++kx) {
                            long ix = long(ox * S + kx) - long(P);
                            if (ix < 0 || ix >= long(W)) continue;
                            acc += w[((co * Ci + ci) * K + ky) * K + kx] *
                                   x[(ci * H + size_t(iy)) * W + size_t(ix)];
                        }
                    }
                }
                y[(co * Ho + oy) * Wo + ox] = acc;
            }
        }
    }
}

template <typename T>
void conv_backward(const LayerInfo& L, const T* p, const std::vector<T>& x,
                   const std::vector<T>& dy, std::vector<T>& dx, T* grad) {
    const size_t Ci = L.in.c, H = L.in.h, W = L.in.w;
    const size_t Co = L.out.c, Ho = L.out.h, Wo = L.out.w;
    const size_t K = L.spec.kernel, S = L.spec.stride, P = L.spec.pad;
    const T* w = p + L.param_offset;
    T* gw = grad + L.param_offset;
    T* gb = L.spec.bias ? gw + Co * Ci * K * K : nullptr;
    dx.assign(Ci * H * W, T(0.0));
    for (size_t co = 0; co < Co; ++co) {
        for (size_t oy = 0; oy < Ho; ++oy) {
            for (size_t ox = 0; ox < Wo; ++ox) {
                const T g = dy[(co * Ho + oy) * Wo + ox];
                if (gb) gb[co] += g;
                for (size_t ci = 0; ci < Ci; ++ci) {
                    for (size_t ky = 0; ky < K; ++ky) {
                        long iy = long(oy * S + ky) - long(P);
                        if (iy < 0 || iy >= long(H)) continue;
                        for (size_t kx = 0; kx < K; ++kx) {
                            long ix = long(ox * S + kx) - long(P);
                            if (ix < 0 || ix >= long(W)) continue;
                            size_t wi = ((co * Ci + ci) * K + ky) * K + kx;
                            size_t xi = (ci * H + size_t(iy)) * W + size_t(ix);
                            gw[wi] += g * x[xi];
                            dx[xi] += w[wi] * g;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void activation_forward(const LayerInfo& L, const std::vector<T>& x,
                        std::vector<T>& y) {
    y.resize(x.size());
    switch (L.spec.kind) {
        case LayerKind::Relu:
            for (size_t i = 0; i < x.size(); ++i)
                y[i] = primal(x[i]) > 0.0 ? x[i] : T(0.0);
            break;
        case LayerKind::Tanh:
            for (size_t i = 0; i < x.size(); ++i) {
                using std::tanh;
                using detail::tanh;
                y[i] = tanh(x[i]);
            }
            break;
        case LayerKind::Square:
            for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
            break;
        default:
            break;
    }
}

template <typename T>
void activation_backward(const LayerInfo& L, const std::vector<T>& x,
                         const std::vector<T>& y, const std::vector<T>& dy,
                         std::vector<T>& dx) {
    dx.resize(x.size());
    switch (L.spec.kind) {
        case LayerKind::Relu:
            for (size_t i = 0; i < x.size(); ++i)
                dx[i] = primal(x[i]) > 0.0 ? dy[i] : T(0.0);
            break;
        case LayerKind::Tanh:
            for (size_t i = 0; i < x.size(); ++i)
                dx[i] = dy[i] * (T(1.0) - y[i] * y[i]);
            break;
        case LayerKind::Square:
            for (size_t i = 0; i < x.size(); ++i)
                dx[i] = T(2.0) * x[i] * dy[i];
            break;
        default:
            break;
    }
}

// Forward all layers; acts[0] is the (constant) input, acts[l+1] the output of
// layer l. Returns per-example loss and, when grad != nullptr, accumulates the
// parameter gradient of that example into grad.
template <typename T>
T loss_and_grad_example(const std::vector<LayerInfo>& layers, LossKind loss_kind,
                        const T* params, const double* x, size_t input_dim,
                        const DatasetSlice& data, size_t example, T* grad) {
    std::vector<std::vector<T>> acts(layers.size() + 1);
    acts[0].assign(x, x + input_dim);
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        switch (L.spec.kind) {
            case LayerKind::Dense:
                dense_forward(L, params, acts[l], acts[l + 1]);
                break;
            case LayerKind::Conv2d:
                conv_forward(L, params, acts[l], acts[l + 1]);
                break;
            default:
                activation_forward(L, acts[l], acts[l + 1]);
                break;
        }
    }

    const std::vector<T>& out = acts.back();
    T loss(0.0);
    std::vector<T> dout(out.size(), T(0.0));
    if (loss_kind == LossKind::MeanSquaredError) {
        const double* t = data.target(example);
        for (size_t i = 0; i < out.size(); ++i) {
            T r = out[i] - T(t[i]);
            loss += T(0.5) * r * r;
            dout[i] = r;
        }
    } else {
        int label = data.label(example);
        size_t imax = 0;
        for (size_t i = 1; i < out.size(); ++i)
            if (primal(out[i]) > primal(out[imax])) imax = i;
        T m = out[imax];
        T sum(0.0);
        std::vector<T> e(out.size());
        for (size_t i = 0; i < out.size(); ++i) {
            using std::exp;
            using detail::exp;
            e[i] = exp(out[i] - m);
            sum += e[i];
        }
        {
            using std::log;
            using detail::log;
            loss = m + log(sum) - out[size_t(label)];
        }
        for (size_t i = 0; i < out.size(); ++i) dout[i] = e[i] / sum;
        dout[size_t(label)] -= T(1.0);
    }

    if (grad) {
        std::vector<T> dcur = std::move(dout);
        std::vector<T> dprev;
        for (size_t l = layers.size(); l-- > 0;) {
            const auto& L = layers[l];
            switch (L.spec.kind) {
                case LayerKind::Dense:
                    dense_backward(L, params, acts[l], dcur, dprev, grad);
                    break;
                case LayerKind::Conv2d:
                    conv_backward(L, params, acts[l], dcur, dprev, grad);
                    break;
                default:
                    activation_backward(L, acts[l], acts[l + 1], dcur, dprev);
                    break;
            }
            std::swap(dcur, dprev);
        }
    }
    return loss;
}

}  // namespace

void Network::check_theta(const ParamVector& theta) const {
    if (!(theta.layout() == layout_ || (theta.layout() && *theta.layout() == *layout_)))
        throw LayoutError("parameter vector does not match network layout");
}

void Network::check_data(const DatasetSlice& data) const {
    if (data.size() == 0) throw ConfigError("empty dataset slice");
    if (data.input_dim() != layers_.front().in.flat())
        throw LayoutError("dataset input dim does not match network input");
    if (data.output_dim() != output_dim())
        throw LayoutError("network output dim does not match label dim");
    if (loss_ == LossKind::CrossEntropy && !data.is_classification())
        throw ConfigError("cross-entropy loss needs a classification slice");
    if (loss_ == LossKind::MeanSquaredError && data.is_classification())
        throw ConfigError("mean-squared-error loss needs a regression slice");
}

std::vector<double> Network::forward(const ParamVector& theta,
                                     const double* x) const {
    check_theta(theta);
    std::vector<std::vector<double>> acts(layers_.size() + 1);
    acts[0].assign(x, x + layers_.front().in.flat());
    const double* p = theta.values().data();
    for (size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        switch (L.spec.kind) {
            case LayerKind::Dense:
                dense_forward(L, p, acts[l], acts[l + 1]);
                break;
            case LayerKind::Conv2d:
                conv_forward(L, p, acts[l], acts[l + 1]);
                break;
            default:
                activation_forward(L, acts[l], acts[l + 1]);
                break;
        }
    }
    return acts.back();
}

double Network::loss(const ParamVector& theta, const DatasetSlice& data) const {
    check_theta(theta);
    check_data(data);
    const double* p = theta.values().data();
    double acc = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
        double li = loss_and_grad_example<double>(layers_, loss_, p, data.input(i),
                                                  data.input_dim(), data, i, nullptr);
        if (!std::isfinite(li))
            throw NumericError("non-finite loss at example " + std::to_string(i),
                               long(i));
        acc += li;
    }
    return acc / double(data.size());
}

double Network::error_rate(const ParamVector& theta, const DatasetSlice& data) const {
    if (loss_ != LossKind::CrossEntropy || !data.is_classification())
        throw UnsupportedMetricError("error rate requires a classification network");
    check_theta(theta);
    check_data(data);
    size_t wrong = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        std::vector<double> out = forward(theta, data.input(i));
        size_t arg = 0;  // ties break toward the lowest class index
        for (size_t c = 1; c < out.size(); ++c)
            if (out[c] > out[arg]) arg = c;
        if (int(arg) != data.label(i)) ++wrong;
    }
    return double(wrong) / double(data.size());
}

ParamVector Network::gradient(const ParamVector& theta,
                              const DatasetSlice& data) const {
    std::vector<size_t> all(data.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return gradient_batch(theta, data, all);
}

ParamVector Network::gradient_batch(const ParamVector& theta,
                                    const DatasetSlice& data,
                                    std::span<const size_t> indices,
                                    double* loss_out) const {
    check_theta(theta);
    check_data(data);
    if (indices.empty()) throw ConfigError("empty batch");
    const double* p = theta.values().data();
    std::vector<double> grad(theta.size(), 0.0);
    double acc = 0.0;
    for (size_t i : indices) {
        double li = loss_and_grad_example<double>(layers_, loss_, p, data.input(i),
                                                  data.input_dim(), data, i,
                                                  grad.data());
        if (!std::isfinite(li))
            throw NumericError("non-finite loss at example " + std::to_string(i),
                               long(i));
        acc += li;
    }
    double inv = 1.0 / double(indices.size());
    for (double& g : grad) g *= inv;
    if (loss_out) *loss_out = acc * inv;
    return ParamVector(theta.layout(), std::move(grad));
}

ParamVector Network::hvp(const ParamVector& theta, const ParamVector& v,
                         const DatasetSlice& data) const {
    check_theta(theta);
    check_data(data);
    require_same_layout(theta, v, "hvp");
    std::vector<Dual> p(theta.size());
    for (size_t i = 0; i < p.size(); ++i) p[i] = Dual(theta[i], v[i]);
    std::vector<Dual> grad(theta.size(), Dual(0.0));
    for (size_t i = 0; i < data.size(); ++i) {
        Dual li = loss_and_grad_example<Dual>(layers_, loss_, p.data(), data.input(i),
                                              data.input_dim(), data, i, grad.data());
        if (!std::isfinite(li.v))
            throw NumericError("non-finite loss at example " + std::to_string(i),
                               long(i));
    }
    std::vector<double> out(theta.size());
    double inv = 1.0 / double(data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = grad[i].d * inv;
    return ParamVector(theta.layout(), std::move(out));
}

double Network::quadratic_form(const ParamVector& theta, const ParamVector& u,
                               const ParamVector& v, const DatasetSlice& data) const {
    require_same_layout(theta, u, "quadratic_form");
    return dot(u, hvp(theta, v, data));
}

}  // namespace lmc
