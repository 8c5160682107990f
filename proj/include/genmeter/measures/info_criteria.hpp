#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/summary.hpp"

namespace genmeter {

// Classic complexity penalty: twice the parameter count.
inline double aic_bias(std::size_t k) { return 2.0 * static_cast<double>(k); }

// Small-sample corrected penalty. Undefined when n <= k + 1 (the
// correction denominator vanishes or flips sign), signalled by nullopt.
inline std::optional<double> aicc_bias(std::size_t k, std::size_t n) {
    double kd = static_cast<double>(k), nd = static_cast<double>(n);
    if (nd <= kd + 1.0) return std::nullopt;
    return 2.0 * kd + 2.0 * kd * (kd + 1.0) / (nd - kd - 1.0);
}

// Diagonal approximation of the trace penalty tr(I^-1 J): sum over
// coordinates of diag(J)/(diag(I) + eps). With a well-specified model
// (diag(I) == diag(J)) and eps = 0 this equals the parameter count.
inline double tic_bias_from_diags(const std::vector<double>& diag_j,
                                  const std::vector<double>& diag_i, double eps) {
    if (diag_j.size() != diag_i.size() || diag_j.empty())
        throw ShapeError("tic_bias_from_diags: dim mismatch");
    if (eps < 0) throw Error("tic_bias_from_diags: eps must be nonnegative");
    double acc = 0.0;
    for (std::size_t i = 0; i < diag_j.size(); ++i) acc += diag_j[i] / (diag_i[i] + eps);
    return acc;
}

// Conservative variant: every J coordinate is divided by the smallest I
// coordinate (floored at eps), upper-bounding the diagonal trace when
// all curvature entries are positive.
inline double tic_bound_from_diags(const std::vector<double>& diag_j,
                                   const std::vector<double>& diag_i, double eps) {
    if (diag_j.size() != diag_i.size() || diag_j.empty())
        throw ShapeError("tic_bound_from_diags: dim mismatch");
    if (eps <= 0) throw Error("tic_bound_from_diags: eps must be positive");
    double min_i = *std::min_element(diag_i.begin(), diag_i.end());
    double denom = std::max(min_i, eps);
    double acc = 0.0;
    for (double j : diag_j) acc += j;
    return acc / denom;
}

// Functional-variance penalty: twice the sum over samples of the
// population variance of the per-draw log-likelihoods. Rows index
// posterior draws, columns index samples.
inline double waic_bias(const std::vector<std::vector<double>>& log_liks) {
    if (log_liks.size() < 2) throw Error("waic_bias: need at least 2 posterior draws");
    std::size_t s = log_liks.size(), n = log_liks.front().size();
    if (n == 0) throw Error("waic_bias: no samples");
    for (const auto& row : log_liks)
        if (row.size() != n) throw ShapeError("waic_bias: inconsistent draw widths");
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < s; ++i) m += log_liks[i][j];
        m /= static_cast<double>(s);
        double var = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            double dv = log_liks[i][j] - m;
            var += dv * dv;
        }
        acc += var / static_cast<double>(s);
    }
    return 2.0 * acc;
}

}  // namespace genmeter
