#pragma once

#include <cstddef>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/summary.hpp"

namespace genmeter {

namespace detail {
inline void check_grad_matrix(const std::vector<std::vector<double>>& grads, std::size_t min_rows) {
    if (grads.size() < min_rows) throw Error("gradient measure: not enough gradient snapshots");
    std::size_t d = grads.front().size();
    if (d == 0) throw Error("gradient measure: empty gradients");
    for (const auto& g : grads)
        if (g.size() != d) throw ShapeError("gradient measure: inconsistent gradient dims");
}
}  // namespace detail

// Mean over coordinates of the population variance of the gradient across
// snapshots. Rows are per-batch (or per-epoch) gradient vectors.
inline double mean_coordinate_variance(const std::vector<std::vector<double>>& grads) {
    detail::check_grad_matrix(grads, 2);
    std::size_t b = grads.size(), d = grads.front().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double m = 0.0;
        for (std::size_t r = 0; r < b; ++r) m += grads[r][i];
        m /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            double dv = grads[r][i] - m;
            var += dv * dv;
        }
        acc += var / static_cast<double>(b);
    }
    return acc / static_cast<double>(d);
}

// Noise-to-signal ratio of the gradient: per-coordinate variance over the
// squared mean (plus eps), averaged over coordinates.
inline double gradient_noise_scale(const std::vector<std::vector<double>>& grads, double eps) {
    detail::check_grad_matrix(grads, 2);
    if (eps <= 0) throw Error("gradient_noise_scale: eps must be positive");
    std::size_t b = grads.size(), d = grads.front().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double m = 0.0;
        for (std::size_t r = 0; r < b; ++r) m += grads[r][i];
        m /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            double dv = grads[r][i] - m;
            var += dv * dv;
        }
        var /= static_cast<double>(b);
        acc += var / (m * m + eps);
    }
    return acc / static_cast<double>(d);
}

// Curvature proxy from squared gradients: per-coordinate mean of g^2
// across batches, shifted by lambda, then aggregated. Result is always
// >= lambda for the mean and harmonic-mean aggregations.
inline double flatness_proxy(const std::vector<std::vector<double>>& grads, double lambda,
                             AggKind agg) {
    detail::check_grad_matrix(grads, 1);
    if (lambda <= 0) throw Error("flatness_proxy: lambda must be positive");
    if (agg == AggKind::kMax || agg == AggKind::kStd)
        throw Error("flatness_proxy: aggregation must be mean, median, or harmonic_mean");
    std::size_t b = grads.size(), d = grads.front().size();
    std::vector<double> precision(d);
    for (std::size_t i = 0; i < d; ++i) {
        double f = 0.0;
        for (std::size_t r = 0; r < b; ++r) f += grads[r][i] * grads[r][i];
        precision[i] = f / static_cast<double>(b) + lambda;
    }
    return aggregate(precision, agg);
}

}  // namespace genmeter
