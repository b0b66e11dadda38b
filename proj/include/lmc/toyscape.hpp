#pragma once

#include <cstddef>
#include <vector>

#include "lmc/errors.hpp"

namespace lmc {

// 1-D landscape built as a product of per-minimum quadratics:
//   f(theta) = prod_i c_i * (theta - m_i)^2
// The curvature scales c_i default to 1 (the plain product form).
class ToyLandscape {
public:
    explicit ToyLandscape(std::vector<double> minima,
                          std::vector<double> curvature_scales = {});

    const std::vector<double>& minima() const { return minima_; }
    double loss(double theta) const;
    // second derivative at an arbitrary point, by analytic differentiation
    double second_derivative(double theta) const;

private:
    std::vector<double> minima_;  // sorted ascending
    std::vector<double> scales_;
};

struct ToyBarrier {
    double alpha = 0.0;
    double value = 0.0;
};

// Maximum of f along the segment [minima[i], minima[j]]; endpoint losses are
// zero, so the barrier is the segment maximum itself.
ToyBarrier toy_barrier(const ToyLandscape& land, size_t i, size_t j,
                       size_t grid_size = 1001);

// Quadratic-model prediction at alpha = 1/2 using the analytic f'' at the two
// minima.
double toy_predicted_barrier(const ToyLandscape& land, size_t i, size_t j);

}  // namespace lmc
