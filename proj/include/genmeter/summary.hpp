#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"

namespace genmeter {

enum class AggKind { kMean, kMax, kStd, kMedian, kHarmonicMean };

inline AggKind parse_agg(const std::string& s) {
    if (s == "mean") return AggKind::kMean;
    if (s == "max") return AggKind::kMax;
    if (s == "std") return AggKind::kStd;
    if (s == "median") return AggKind::kMedian;
    if (s == "harmonic_mean") return AggKind::kHarmonicMean;
    throw ConfigError("unknown aggregation: " + s);
}

inline const char* to_string(AggKind a) {
    switch (a) {
        case AggKind::kMean: return "mean";
        case AggKind::kMax: return "max";
        case AggKind::kStd: return "std";
        case AggKind::kMedian: return "median";
        case AggKind::kHarmonicMean: return "harmonic_mean";
    }
    return "?";
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw Error("mean_of: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Uncorrected (population) variance: mean of squared deviations.
inline double population_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw Error("population_variance: need at least 2 values");
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw Error("median_of: empty input");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Lower empirical percentile: sorted v at index floor(p * (n - 1)).
// No interpolation, so the result is always an observed value.
inline double percentile_lower(std::vector<double> v, double p) {
    if (v.empty()) throw Error("percentile_lower: empty input");
    if (p < 0.0 || p > 1.0) throw Error("percentile_lower: p out of [0,1]");
    std::sort(v.begin(), v.end());
    auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(v.size() - 1)));
    return v[idx];
}

inline double aggregate(const std::vector<double>& v, AggKind a) {
    if (v.empty()) throw Error("aggregate: empty input");
    switch (a) {
        case AggKind::kMean: return mean_of(v);
        case AggKind::kMax: return *std::max_element(v.begin(), v.end());
        case AggKind::kStd: {
            if (v.size() < 2) return 0.0;
            return std::sqrt(population_variance(v));
        }
        case AggKind::kMedian: return median_of(v);
        case AggKind::kHarmonicMean: {
            double s = 0.0;
            for (double x : v) {
                if (x <= 0.0) throw Error("aggregate: harmonic mean needs positive values");
                s += 1.0 / x;
            }
            return static_cast<double>(v.size()) / s;
        }
    }
    throw Error("aggregate: unknown kind");
}

}  // namespace genmeter
