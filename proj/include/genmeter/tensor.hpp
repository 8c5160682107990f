#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"

namespace genmeter {

// Dense row-major n-d array of doubles. Invariant: v.size() == product(shape).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shp, double fill = 0.0)
        : shape(std::move(shp)), v(count(shape), fill) {}

    Tensor(std::vector<std::size_t> shp, std::vector<double> vals)
        : shape(std::move(shp)), v(std::move(vals)) {
        if (v.size() != count(shape)) throw ShapeError("tensor value count does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& shp) {
        std::size_t n = 1;
        for (std::size_t d : shp) {
            if (d == 0) throw ShapeError("zero dimension in tensor shape");
            n *= d;
        }
        return n;
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    static Tensor row(std::vector<double> vals) {
        std::size_t n = vals.size();
        return Tensor({n}, std::move(vals));
    }

    std::size_t size() const { return v.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw NonFiniteError(std::string("non-finite value in ") + where);
}

inline void require_finite(double x, const char* where) {
    if (!std::isfinite(x)) throw NonFiniteError(std::string("non-finite value in ") + where);
}

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double l1_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace genmeter
