#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// Row-wise stable softmax.
inline Tensor softmax_rows(const Tensor& logits) {
    if (logits.shape.size() != 2) throw ShapeError("softmax_rows: need a 2-d tensor");
    Tensor out(logits.shape, 0.0);
    std::size_t n = logits.rows(), k = logits.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(i, c));
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(logits.at(i, c) - mx);
        for (std::size_t c = 0; c < k; ++c) out.at(i, c) = std::exp(logits.at(i, c) - mx) / z;
    }
    return out;
}

struct PredictionArchive {
    Tensor probs;                    // n x K softmax rows
    std::vector<int> labels;
    std::vector<int> predicted;      // argmax, lowest index wins ties
    std::vector<double> confidence;  // max probability per row
    std::vector<bool> correct;
};

inline PredictionArchive prediction_archive(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2) throw ShapeError("prediction_archive: need 2-d logits");
    std::size_t n = logits.rows(), k = logits.cols();
    if (labels.size() != n) throw ShapeError("prediction_archive: label count mismatch");
    PredictionArchive a;
    a.probs = softmax_rows(logits);
    a.labels = labels;
    a.predicted.resize(n);
    a.confidence.resize(n);
    a.correct.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ShapeError("prediction_archive: label out of range");
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (a.probs.at(i, c) > a.probs.at(i, best)) best = c;
        a.predicted[i] = static_cast<int>(best);
        a.confidence[i] = a.probs.at(i, best);
        a.correct[i] = (a.predicted[i] == y);
    }
    return a;
}

// Bin index for a confidence value under M equal-width bins on (0, 1]
// with right-closed edges: bin m covers ((m-1)/M, m/M].
inline std::size_t confidence_bin(double conf, int bins) {
    if (bins < 1) throw Error("confidence_bin: bins must be >= 1");
    auto idx = static_cast<long long>(std::ceil(conf * static_cast<double>(bins))) - 1;
    idx = std::max(0LL, std::min<long long>(idx, bins - 1));
    return static_cast<std::size_t>(idx);
}

struct CalibrationBins {
    std::vector<std::size_t> count;
    std::vector<double> acc_sum;
    std::vector<double> conf_sum;
};

inline CalibrationBins build_confidence_bins(const PredictionArchive& a, int bins) {
    if (a.confidence.empty()) throw Error("build_confidence_bins: empty archive");
    CalibrationBins b;
    b.count.assign(static_cast<std::size_t>(bins), 0);
    b.acc_sum.assign(static_cast<std::size_t>(bins), 0.0);
    b.conf_sum.assign(static_cast<std::size_t>(bins), 0.0);
    for (std::size_t i = 0; i < a.confidence.size(); ++i) {
        std::size_t m = confidence_bin(a.confidence[i], bins);
        b.count[m] += 1;
        b.acc_sum[m] += a.correct[i] ? 1.0 : 0.0;
        b.conf_sum[m] += a.confidence[i];
    }
    return b;
}

// Count-weighted mean absolute accuracy/confidence gap over bins.
inline double expected_calibration_error(const PredictionArchive& a, int bins) {
    CalibrationBins b = build_confidence_bins(a, bins);
    double n = static_cast<double>(a.confidence.size());
    double e = 0.0;
    for (std::size_t m = 0; m < b.count.size(); ++m) {
        if (b.count[m] == 0) continue;
        double c = static_cast<double>(b.count[m]);
        e += (c / n) * std::abs(b.acc_sum[m] / c - b.conf_sum[m] / c);
    }
    return e;
}

// Largest per-bin gap over nonempty bins.
inline double max_calibration_error(const PredictionArchive& a, int bins) {
    CalibrationBins b = build_confidence_bins(a, bins);
    double worst = 0.0;
    for (std::size_t m = 0; m < b.count.size(); ++m) {
        if (b.count[m] == 0) continue;
        double c = static_cast<double>(b.count[m]);
        worst = std::max(worst, std::abs(b.acc_sum[m] / c - b.conf_sum[m] / c));
    }
    return worst;
}

// Unweighted mean per-bin gap over nonempty bins, so sparse bins count as
// much as dense ones.
inline double reliability_gap(const PredictionArchive& a, int bins) {
    CalibrationBins b = build_confidence_bins(a, bins);
    double acc = 0.0;
    std::size_t nonempty = 0;
    for (std::size_t m = 0; m < b.count.size(); ++m) {
        if (b.count[m] == 0) continue;
        double c = static_cast<double>(b.count[m]);
        acc += std::abs(b.acc_sum[m] / c - b.conf_sum[m] / c);
        ++nonempty;
    }
    if (nonempty == 0) throw Error("reliability_gap: no populated bins");
    return acc / static_cast<double>(nonempty);
}

// Adaptive variant: for each class, sort that class's predicted
// probability over all samples and split into M equal-count bins (the
// first N mod M bins take the extra member). Gap compares mean
// probability against the fraction whose true label is that class,
// averaged over all K*M bins. Sorting breaks probability ties by the
// label indicator so the result does not depend on input order.
inline double adaptive_calibration_error(const PredictionArchive& a, int bins) {
    if (bins < 1) throw Error("adaptive_calibration_error: bins must be >= 1");
    std::size_t n = a.labels.size();
    if (n == 0) throw Error("adaptive_calibration_error: empty archive");
    std::size_t k = a.probs.cols();
    double total = 0.0;
    std::vector<std::pair<double, int>> items(n);
    for (std::size_t cls = 0; cls < k; ++cls) {
        for (std::size_t i = 0; i < n; ++i) {
            int hit = (a.labels[i] == static_cast<int>(cls)) ? 1 : 0;
            items[i] = {a.probs.at(i, cls), hit};
        }
        std::sort(items.begin(), items.end());
        std::size_t base = n / static_cast<std::size_t>(bins);
        std::size_t extra = n % static_cast<std::size_t>(bins);
        std::size_t pos = 0;
        for (std::size_t m = 0; m < static_cast<std::size_t>(bins); ++m) {
            std::size_t take = base + (m < extra ? 1 : 0);
            if (take == 0) continue;  // empty bin contributes zero gap
            double conf = 0.0, acc = 0.0;
            for (std::size_t j = 0; j < take; ++j) {
                conf += items[pos + j].first;
                acc += items[pos + j].second;
            }
            pos += take;
            double c = static_cast<double>(take);
            total += std::abs(acc / c - conf / c);
        }
    }
    return total / (static_cast<double>(k) * static_cast<double>(bins));
}

// Mean cross entropy of temperature-scaled logits.
inline double mean_ce_at_temperature(const Tensor& logits, const std::vector<int>& labels,
                                     double temp) {
    if (temp <= 0) throw Error("mean_ce_at_temperature: temperature must be positive");
    std::size_t n = logits.rows(), k = logits.cols();
    if (labels.size() != n) throw ShapeError("mean_ce_at_temperature: label count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = logits.at(i, 0) / temp;
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(i, c) / temp);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(logits.at(i, c) / temp - mx);
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw ShapeError("mean_ce_at_temperature: label out of range");
        acc += -(logits.at(i, static_cast<std::size_t>(y)) / temp - mx - std::log(z));
    }
    return acc / static_cast<double>(n);
}

struct TemperatureResult {
    double t_opt = 1.0;
    double ce_before = 0.0;  // cross entropy at T = 1
    double ce_after = 0.0;   // cross entropy at t_opt
    double ece_after = 0.0;  // calibration error of rescaled probabilities
};

// Fits a single temperature by minimizing mean cross entropy: coarse
// log-spaced grid over T in [e^-3, e^3], then golden-section refinement
// around the best grid point. Falls back to T = 1 if the search cannot
// beat it, so scaling never hurts cross entropy.
inline TemperatureResult temperature_scale(const Tensor& logits, const std::vector<int>& labels,
                                           int bins) {
    auto ce_log = [&](double lt) { return mean_ce_at_temperature(logits, labels, std::exp(lt)); };

    constexpr int kGrid = 25;
    constexpr double kLo = -3.0, kHi = 3.0;
    double best_lt = kLo, best_ce = ce_log(kLo);
    int best_idx = 0;
    for (int i = 1; i < kGrid; ++i) {
        double lt = kLo + (kHi - kLo) * static_cast<double>(i) / (kGrid - 1);
        double ce = ce_log(lt);
        if (ce < best_ce) {
            best_ce = ce;
            best_lt = lt;
            best_idx = i;
        }
    }
    double step = (kHi - kLo) / (kGrid - 1);
    double a = std::max(kLo, kLo + step * (best_idx - 1));
    double b = std::min(kHi, kLo + step * (best_idx + 1));

    // Golden-section on log-temperature until the bracket is tight.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = ce_log(x1), f2 = ce_log(x2);
    while (b - a > 1e-4) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = ce_log(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = ce_log(x2);
        }
    }
    double refined_lt = 0.5 * (a + b);
    double refined_ce = ce_log(refined_lt);
    if (refined_ce < best_ce) {
        best_ce = refined_ce;
        best_lt = refined_lt;
    }

    TemperatureResult res;
    res.ce_before = mean_ce_at_temperature(logits, labels, 1.0);
    if (best_ce <= res.ce_before) {
        res.t_opt = std::exp(best_lt);
        res.ce_after = best_ce;
    } else {
        res.t_opt = 1.0;
        res.ce_after = res.ce_before;
    }
    Tensor scaled = logits;
    for (auto& v : scaled.v) v /= res.t_opt;
    res.ece_after = expected_calibration_error(prediction_archive(scaled, labels), bins);
    return res;
}

}  // namespace genmeter
