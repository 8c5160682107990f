#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/summary.hpp"

namespace genmeter {

// A minibatch objective: loss and gradient as functions of the flat
// parameter vector. Model-free so surrogate objectives can stand in.
struct BatchObjective {
    std::function<double(const std::vector<double>&)> loss;
    std::function<std::vector<double>(const std::vector<double>&)> grad;
};

inline std::vector<double> log_spaced(double lo, double hi, int count) {
    if (count < 2 || lo <= 0 || hi <= lo) throw Error("log_spaced: bad range");
    std::vector<double> out(static_cast<std::size_t>(count));
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] =
            std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return out;
}

struct SamResult {
    double value = 0.0;
    int degenerate_batches = 0;
    int total_batches = 0;
    bool all_degenerate = false;
};

// One-step worst-case loss increase: per batch, ascend by rho along the
// normalized batch gradient and record the loss delta. Batches whose
// gradient norm is below 1e-12 have no usable ascent direction and
// contribute zero.
inline SamResult sam_sharpness(const std::vector<BatchObjective>& batches,
                               const std::vector<double>& theta, double rho) {
    if (batches.empty()) throw Error("sam_sharpness: no batches");
    if (rho <= 0) throw Error("sam_sharpness: rho must be positive");
    SamResult res;
    res.total_batches = static_cast<int>(batches.size());
    double acc = 0.0;
    for (const auto& b : batches) {
        std::vector<double> g = b.grad(theta);
        if (g.size() != theta.size()) throw ShapeError("sam_sharpness: gradient dim mismatch");
        double gn = l2_norm(g);
        if (gn < 1e-12) {
            ++res.degenerate_batches;
            continue;  // contributes 0
        }
        std::vector<double> shifted = theta;
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += rho * g[i] / gn;
        acc += b.loss(shifted) - b.loss(theta);
    }
    res.value = acc / static_cast<double>(res.total_batches);
    res.all_degenerate = (res.degenerate_batches == res.total_batches);
    return res;
}

struct AdaptiveSharpnessResult {
    double value = 0.0;
    std::vector<double> radii;
    std::vector<double> ratios;  // sharpness(rho)/rho for each usable radius
    bool ok = false;
};

// Radius-normalized sharpness maximized over a log-spaced radius sweep.
// Radii where every batch is degenerate are skipped; if none remain the
// result is unusable.
inline AdaptiveSharpnessResult adaptive_sharpness(const std::vector<BatchObjective>& batches,
                                                  const std::vector<double>& theta,
                                                  const std::vector<double>& radii) {
    if (radii.empty()) throw Error("adaptive_sharpness: no radii");
    AdaptiveSharpnessResult out;
    out.radii = radii;
    for (double rho : radii) {
        SamResult s = sam_sharpness(batches, theta, rho);
        if (s.all_degenerate) continue;
        out.ratios.push_back(s.value / rho);
    }
    if (out.ratios.empty()) return out;
    out.ok = true;
    out.value = *std::max_element(out.ratios.begin(), out.ratios.end());
    return out;
}

enum class NoiseKind { kMagnitude, kMagnitudeInit, kMagnitudeFlat };

struct NoiseSharpnessResult {
    double value = 0.0;
    int discarded_samples = 0;
    bool ok = false;
    std::string note;
};

// Loss increase under random parameter perturbations.
//  - kMagnitude / kMagnitudeInit: per-tensor Gaussian noise with stddev
//    r * std(tensor), aggregated over samples, then scaled by a global
//    magnitude factor (||theta||/sqrt(d), or the distance to the
//    initialization for the Init variant).
//  - kMagnitudeFlat: multiplicative-style noise r * z * (|theta| + eps),
//    no magnitude factor.
// Samples whose perturbed loss is non-finite are discarded.
inline NoiseSharpnessResult noise_sharpness(
    const std::function<double(const std::vector<double>&)>& pool_loss, const ParamVector& params,
    const std::optional<std::vector<double>>& init_flat, NoiseKind kind, double r, int samples,
    AggKind agg, double eps_scale, std::uint64_t seed) {
    if (samples < 1) throw Error("noise_sharpness: samples must be >= 1");
    if (r < 0) throw Error("noise_sharpness: r must be nonnegative");
    if (agg != AggKind::kMax && agg != AggKind::kMean)
        throw Error("noise_sharpness: aggregation must be max or mean");

    std::vector<double> theta = params.flatten();
    double base = pool_loss(theta);

    // Per-coordinate noise scale.
    std::vector<double> scale(theta.size());
    if (kind == NoiseKind::kMagnitudeFlat) {
        for (std::size_t i = 0; i < theta.size(); ++i) scale[i] = r * (std::abs(theta[i]) + eps_scale);
    } else {
        std::size_t off = 0;
        for (std::size_t s = 0; s < params.segment_count(); ++s) {
            const auto& vals = params.segment(s).tensor.v;
            double m = 0.0;
            for (double x : vals) m += x;
            m /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double x : vals) var += (x - m) * (x - m);
            double sd = std::sqrt(var / static_cast<double>(vals.size()));
            for (std::size_t i = 0; i < vals.size(); ++i) scale[off + i] = r * sd;
            off += vals.size();
        }
    }

    Rng rng(derive_seed(seed, "noise_sharpness"));
    NoiseSharpnessResult res;
    std::vector<double> deltas;
    std::vector<double> shifted(theta.size());
    for (int k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            shifted[i] = theta[i] + scale[i] * rng.normal();
        double perturbed;
        try {
            perturbed = pool_loss(shifted);
        } catch (const NonFiniteError&) {
            ++res.discarded_samples;
            continue;
        }
        if (!std::isfinite(perturbed)) {
            ++res.discarded_samples;
            continue;
        }
        deltas.push_back(perturbed - base);
    }
    if (deltas.empty()) {
        res.note = "all perturbation samples non-finite";
        return res;
    }

    double raw = aggregate(deltas, agg);
    double d = static_cast<double>(theta.size());
    switch (kind) {
        case NoiseKind::kMagnitude:
            res.value = raw * l2_norm(theta) / std::sqrt(d);
            break;
        case NoiseKind::kMagnitudeInit: {
            double dist;
            if (init_flat.has_value()) {
                if (init_flat->size() != theta.size())
                    throw ShapeError("noise_sharpness: init dim mismatch");
                std::vector<double> diff(theta.size());
                for (std::size_t i = 0; i < theta.size(); ++i) diff[i] = theta[i] - (*init_flat)[i];
                dist = l2_norm(diff);
            } else {
                dist = l2_norm(theta);  // fall back to the origin-based factor
                res.note = "no initialization available; used origin distance";
            }
            res.value = raw * dist / std::sqrt(d);
            break;
        }
        case NoiseKind::kMagnitudeFlat:
            res.value = raw;
            break;
    }
    res.ok = true;
    return res;
}

}  // namespace genmeter
