#include "lmc/param_vector.hpp"

#include <algorithm>

namespace lmc {

LayerLayout::LayerLayout(std::vector<LayerSegment> segments)
    : segments_(std::move(segments)) {
    size_t cursor = 0;
    std::set<std::string> seen;
    for (const auto& seg : segments_) {
        if (seg.start != cursor)
            throw LayoutError("layout segments must be contiguous, gap before '" +
                              seg.name + "'");
        if (seg.length == 0)
            throw LayoutError("layout segment '" + seg.name + "' is empty");
        if (!seen.insert(seg.name).second)
            throw LayoutError("duplicate layer name '" + seg.name + "'");
        cursor += seg.length;
    }
    total_ = cursor;
}

const LayerSegment& LayerLayout::segment(const std::string& name) const {
    for (const auto& seg : segments_)
        if (seg.name == name) return seg;
    throw ConfigError("unknown layer '" + name + "'");
}

bool LayerLayout::has_layer(const std::string& name) const {
    return std::any_of(segments_.begin(), segments_.end(),
                       [&](const LayerSegment& s) { return s.name == name; });
}

std::vector<std::string> LayerLayout::layer_names() const {
    std::vector<std::string> names;
    names.reserve(segments_.size());
    for (const auto& seg : segments_) names.push_back(seg.name);
    return names;
}

bool LayerLayout::operator==(const LayerLayout& other) const {
    if (total_ != other.total_ || segments_.size() != other.segments_.size())
        return false;
    for (size_t i = 0; i < segments_.size(); ++i) {
        const auto& a = segments_[i];
        const auto& b = other.segments_[i];
        if (a.name != b.name || a.start != b.start || a.length != b.length)
            return false;
    }
    return true;
}

ParamVector::ParamVector(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_) throw LayoutError("ParamVector requires a layout");
    if (values_.size() != layout_->total_params())
        throw LayoutError("ParamVector length " + std::to_string(values_.size()) +
                          " does not match layout total " +
                          std::to_string(layout_->total_params()));
}

ParamVector ParamVector::zeros(LayoutPtr layout) {
    std::vector<double> v(layout->total_params(), 0.0);
    return ParamVector(std::move(layout), std::move(v));
}

void ParamVector::check_finite() const {
    for (size_t i = 0; i < values_.size(); ++i)
        if (!std::isfinite(values_[i]))
            throw NumericError("non-finite parameter at index " + std::to_string(i),
                               static_cast<long>(i));
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (layout_ == other.layout_) return true;
    return layout_ && other.layout_ && *layout_ == *other.layout_;
}

void require_same_layout(const ParamVector& a, const ParamVector& b,
                         const char* what) {
    if (!a.same_layout(b))
        throw LayoutError(std::string("layout mismatch in ") + what);
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    require_same_layout(*this, other, "operator+=");
    for (size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
    require_same_layout(*this, other, "operator-=");
    for (size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

double dot(const ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b, "dot");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(const ParamVector& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const ParamVector& v) {
    double m = 0.0;
    for (size_t i = 0; i < v.size(); ++i) m = std::max(m, std::fabs(v[i]));
    return m;
}

ParamVector interpolate(const ParamVector& a, const ParamVector& b, double alpha) {
    require_same_layout(a, b, "interpolate");
    if (alpha == 0.0) return a;
    if (alpha == 1.0) return b;
    // delta form so identical endpoints reproduce them bit-exactly at any alpha
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        out[i] = a[i] + alpha * (b[i] - a[i]);
    return ParamVector(a.layout(), std::move(out));
}

LayerMask::LayerMask(LayoutPtr layout, std::set<std::string> layer_set)
    : layout_(std::move(layout)), layers_(std::move(layer_set)) {
    if (!layout_) throw LayoutError("LayerMask requires a layout");
    for (const auto& name : layers_)
        if (!layout_->has_layer(name))
            throw ConfigError("mask references unknown layer '" + name + "'");
}

ParamVector LayerMask::apply(const ParamVector& v) const {
    if (!(v.layout() == layout_ || (v.layout() && *v.layout() == *layout_)))
        throw LayoutError("layout mismatch in mask apply");
    ParamVector out = ParamVector::zeros(v.layout());
    for (const auto& name : layers_) {
        const auto& seg = layout_->segment(name);
        for (size_t i = seg.start; i < seg.start + seg.length; ++i) out[i] = v[i];
    }
    return out;
}

}  // namespace lmc
