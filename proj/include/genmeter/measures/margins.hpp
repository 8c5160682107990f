#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/summary.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// Classification margin of sample n: logit of the true class minus the
// largest logit among the other classes. Positive iff the sample is
// classified correctly with room to spare.
inline std::vector<double> classification_margins(const Tensor& logits,
                                                  const std::vector<int>& labels) {
    if (logits.shape.size() != 2) throw ShapeError("classification_margins: logits must be 2-d");
    std::size_t n = logits.rows();
    std::size_t k = logits.cols();
    if (labels.size() != n) throw ShapeError("classification_margins: label count mismatch");
    if (k < 2) throw ShapeError("classification_margins: need at least 2 classes");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ShapeError("classification_margins: label out of range");
        double true_logit = logits.at(i, static_cast<std::size_t>(y));
        double best_other = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == static_cast<std::size_t>(y)) continue;
            best_other = std::max(best_other, logits.at(i, c));
        }
        out[i] = true_logit - best_other;
    }
    return out;
}

// Keeps a value away from zero without changing its sign. Zero maps to
// +eps so downstream reciprocals stay finite and positive-leaning.
inline double clip_away_from_zero(double z, double eps) {
    if (eps <= 0) throw Error("clip_away_from_zero: eps must be positive");
    double sign = (z < 0.0) ? -1.0 : 1.0;
    return sign * std::max(std::abs(z), eps);
}

struct MarginStats {
    std::vector<double> margins;
    double q10 = 0.0;  // lower 10th percentile of margins
};

inline MarginStats margin_stats(const Tensor& logits, const std::vector<int>& labels) {
    MarginStats st;
    st.margins = classification_margins(logits, labels);
    if (st.margins.size() < 10)
        throw Error("margin_stats: need at least 10 samples for a stable percentile");
    st.q10 = percentile_lower(st.margins, 0.10);
    return st;
}

inline double inverse_margin(double q10, double eps_margin) {
    return 1.0 / clip_away_from_zero(q10, eps_margin);
}

// Norm-over-margin measures divide by |q10| floored at eps, so they are
// always nonnegative even when the percentile margin is negative.
inline double norm_over_margin(double norm, double q10, double eps_margin) {
    if (eps_margin <= 0) throw Error("norm_over_margin: eps must be positive");
    return norm / std::max(std::abs(q10), eps_margin);
}

}  // namespace genmeter
