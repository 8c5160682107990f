#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// Ordered, named parameter segments of one model. Segment order is fixed by
// the architecture; flatten()/unflatten() round-trip exactly in that order.
class ParamVector {
  public:
    struct Segment {
        std::string name;
        Tensor tensor;
    };

    ParamVector() = default;

    void add(std::string name, Tensor t) { segments_.push_back({std::move(name), std::move(t)}); }

    std::size_t segment_count() const { return segments_.size(); }
    const Segment& segment(std::size_t i) const { return segments_[i]; }
    Segment& segment(std::size_t i) { return segments_[i]; }

    std::size_t dim() const {
        std::size_t d = 0;
        for (const auto& s : segments_) d += s.tensor.size();
        return d;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(dim());
        for (const auto& s : segments_)
            out.insert(out.end(), s.tensor.v.begin(), s.tensor.v.end());
        return out;
    }

    // Rebuilds values from a flat vector; shape/structure must match this one.
    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != dim()) throw ShapeError("unflatten: dimension mismatch");
        std::size_t off = 0;
        for (auto& s : segments_) {
            for (double& x : s.tensor.v) x = flat[off++];
        }
    }

    ParamVector with_flat(const std::vector<double>& flat) const {
        ParamVector out = *this;
        out.unflatten(flat);
        return out;
    }

    bool same_structure(const ParamVector& o) const {
        if (segments_.size() != o.segments_.size()) return false;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            if (segments_[i].name != o.segments_[i].name) return false;
            if (segments_[i].tensor.shape != o.segments_[i].tensor.shape) return false;
        }
        return true;
    }

    auto begin() { return segments_.begin(); }
    auto end() { return segments_.end(); }
    auto begin() const { return segments_.begin(); }
    auto end() const { return segments_.end(); }

  private:
    std::vector<Segment> segments_;
};

inline double l2_norm(const ParamVector& p) {
    double s = 0.0;
    for (const auto& seg : p)
        for (double x : seg.tensor.v) s += x * x;
    return std::sqrt(s);
}

inline double l1_norm(const ParamVector& p) {
    double s = 0.0;
    for (const auto& seg : p)
        for (double x : seg.tensor.v) s += std::fabs(x);
    return s;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.segment_count(); ++i) {
        const auto& ta = a.segment(i).tensor.v;
        const auto& tb = b.segment(i).tensor.v;
        for (std::size_t j = 0; j < ta.size(); ++j) s += ta[j] * tb[j];
    }
    return s;
}

// a += c * b, segment-wise.
inline void axpy(ParamVector& a, double c, const ParamVector& b) {
    for (std::size_t i = 0; i < a.segment_count(); ++i) {
        auto& ta = a.segment(i).tensor.v;
        const auto& tb = b.segment(i).tensor.v;
        for (std::size_t j = 0; j < ta.size(); ++j) ta[j] += c * tb[j];
    }
}

inline double l2_distance(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.segment_count(); ++i) {
        const auto& ta = a.segment(i).tensor.v;
        const auto& tb = b.segment(i).tensor.v;
        for (std::size_t j = 0; j < ta.size(); ++j) {
            double d = ta[j] - tb[j];
            s += d * d;
        }
    }
    return std::sqrt(s);
}

}  // namespace genmeter
