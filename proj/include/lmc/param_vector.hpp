#pragma once

#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "lmc/errors.hpp"

namespace lmc {

// One contiguous run of parameters belonging to a named layer.
struct LayerSegment {
    std::string name;
    size_t start = 0;
    size_t length = 0;
};

// Partition of [0, total_params) into named, contiguous, non-overlapping
// segments. Shared (via shared_ptr) by every ParamVector of a network.
class LayerLayout {
public:
    LayerLayout() = default;
    explicit LayerLayout(std::vector<LayerSegment> segments);

    size_t total_params() const { return total_; }
    const std::vector<LayerSegment>& segments() const { return segments_; }
    const LayerSegment& segment(const std::string& name) const;
    bool has_layer(const std::string& name) const;
    std::vector<std::string> layer_names() const;

    bool operator==(const LayerLayout& other) const;

private:
    std::vector<LayerSegment> segments_;
    size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

// Flat parameter vector tied to a layout. The common currency of all
// geometry and barrier math.
class ParamVector {
public:
    ParamVector() = default;
    ParamVector(LayoutPtr layout, std::vector<double> values);
    static ParamVector zeros(LayoutPtr layout);

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const LayoutPtr& layout() const { return layout_; }
    size_t size() const { return values_.size(); }
    double operator[](size_t i) const { return values_[i]; }
    double& operator[](size_t i) { return values_[i]; }

    void check_finite() const;  // throws NumericError
    bool same_layout(const ParamVector& other) const;

    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator-=(const ParamVector& other);
    ParamVector& operator*=(double s);

    friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
    friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
    friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

private:
    LayoutPtr layout_;
    std::vector<double> values_;
};

double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& v);
double norm_inf(const ParamVector& v);

// (1-alpha)*a + alpha*b
ParamVector interpolate(const ParamVector& a, const ParamVector& b, double alpha);

// Selects a subset of layers; applying it zeroes everything outside the set.
class LayerMask {
public:
    LayerMask(LayoutPtr layout, std::set<std::string> layer_set);

    const std::set<std::string>& layer_set() const { return layers_; }
    const LayoutPtr& layout() const { return layout_; }

    ParamVector apply(const ParamVector& v) const;

private:
    LayoutPtr layout_;
    std::set<std::string> layers_;
};

void require_same_layout(const ParamVector& a, const ParamVector& b,
                         const char* what);

}  // namespace lmc
