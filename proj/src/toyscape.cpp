#include "lmc/toyscape.hpp"

#include <algorithm>

namespace lmc {

ToyLandscape::ToyLandscape(std::vector<double> minima,
                           std::vector<double> curvature_scales)
    : minima_(std::move(minima)), scales_(std::move(curvature_scales)) {
    if (minima_.size() < 2) throw ConfigError("toy landscape needs >= 2 minima");
    if (!std::is_sorted(minima_.begin(), minima_.end()))
        throw ConfigError("toy minima must be sorted ascending");
    for (size_t i = 1; i < minima_.size(); ++i)
        if (minima_[i] == minima_[i - 1])
            throw ConfigError("toy minima must be distinct");
    if (scales_.empty()) scales_.assign(minima_.size(), 1.0);
    if (scales_.size() != minima_.size())
        throw ConfigError("curvature scales must match minima count");
    for (double c : scales_)
        if (c <= 0.0) throw ConfigError("curvature scales must be positive");
}

double ToyLandscape::loss(double theta) const {
    double f = 1.0;
    for (size_t i = 0; i < minima_.size(); ++i) {
        double d = theta - minima_[i];
        f *= scales_[i] * d * d;
    }
    return f;
}

double ToyLandscape::second_derivative(double theta) const {
    const size_t n = minima_.size();
    auto g = [&](size_t i) {
        double d = theta - minima_[i];
        return scales_[i] * d * d;
    };
    auto gp = [&](size_t i) { return 2.0 * scales_[i] * (theta - minima_[i]); };
    auto prod_except = [&](size_t skip1, size_t skip2) {
        double p = 1.0;
        for (size_t j = 0; j < n; ++j)
            if (j != skip1 && j != skip2) p *= g(j);
        return p;
    };
    double f2 = 0.0;
    for (size_t i = 0; i < n; ++i)
        f2 += 2.0 * scales_[i] * prod_except(i, i);
    for (size_t i = 0; i < n; ++i)
        for (size_t k = 0; k < n; ++k)
            if (k != i) f2 += gp(i) * gp(k) * prod_except(i, k);
    return f2;
}

ToyBarrier toy_barrier(const ToyLandscape& land, size_t i, size_t j,
                       size_t grid_size) {
    if (i == j) throw ConfigError("toy barrier needs two distinct minima");
    if (i >= land.minima().size() || j >= land.minima().size())
        throw ConfigError("toy minimum index out of range");
    if (grid_size < 3) throw ConfigError("toy grid needs at least 3 points");
    double a = land.minima()[i];
    double b = land.minima()[j];
    ToyBarrier best;
    for (size_t k = 0; k < grid_size; ++k) {
        double alpha = double(k) / double(grid_size - 1);
        double v = land.loss((1.0 - alpha) * a + alpha * b);
        if (v > best.value) {
            best.value = v;
            best.alpha = alpha;
        }
    }
    return best;
}

double toy_predicted_barrier(const ToyLandscape& land, size_t i, size_t j) {
    if (i == j) throw ConfigError("toy predicted barrier needs distinct minima");
    if (i >= land.minima().size() || j >= land.minima().size())
        throw ConfigError("toy minimum index out of range");
    double d = land.minima()[j] - land.minima()[i];
    double h1 = land.second_derivative(land.minima()[i]);
    double h2 = land.second_derivative(land.minima()[j]);
    // alpha = 1/2 of the quadratic barrier model
    return 0.125 * d * (0.5 * h1 + 0.5 * h2) * d;
}

}  // namespace lmc
