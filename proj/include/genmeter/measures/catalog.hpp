#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"

namespace genmeter {

enum class MeasureCategory {
    kBaselineOutput,
    kNormMargin,
    kSharpness,
    kOptimization,
    kInformationCriteria,
    kCalibration,
};

inline const char* to_string(MeasureCategory c) {
    switch (c) {
        case MeasureCategory::kBaselineOutput: return "baseline_output";
        case MeasureCategory::kNormMargin: return "norm_margin";
        case MeasureCategory::kSharpness: return "sharpness";
        case MeasureCategory::kOptimization: return "optimization";
        case MeasureCategory::kInformationCriteria: return "information_criteria";
        case MeasureCategory::kCalibration: return "calibration";
    }
    return "?";
}

inline bool parse_category(const std::string& s, MeasureCategory& out) {
    for (MeasureCategory c :
         {MeasureCategory::kBaselineOutput, MeasureCategory::kNormMargin,
          MeasureCategory::kSharpness, MeasureCategory::kOptimization,
          MeasureCategory::kInformationCriteria, MeasureCategory::kCalibration}) {
        if (s == to_string(c)) {
            out = c;
            return true;
        }
    }
    return false;
}

// One computed measure on one run. status ok implies a finite value; failures
// carry the reason in detail and keep value = NaN.
struct MeasureValue {
    std::string name;
    MeasureCategory category = MeasureCategory::kBaselineOutput;
    double value = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string detail;
    std::uint64_t compute_seed = 0;

    static MeasureValue success(std::string name, MeasureCategory cat, double value,
                                std::uint64_t seed) {
        if (!std::isfinite(value))
            return failure(std::move(name), cat, "non-finite result", seed);
        MeasureValue v;
        v.name = std::move(name);
        v.category = cat;
        v.value = value;
        v.ok = true;
        v.compute_seed = seed;
        return v;
    }

    static MeasureValue failure(std::string name, MeasureCategory cat, std::string reason,
                                std::uint64_t seed) {
        MeasureValue v;
        v.name = std::move(name);
        v.category = cat;
        v.ok = false;
        v.detail = std::move(reason);
        v.compute_seed = seed;
        return v;
    }
};

struct CatalogEntry {
    const char* name;
    MeasureCategory category;
};

// The fixed measure catalog. Order here is the canonical emission order for
// measures.csv. Completeness rule: every name is present on every measured
// run, as ok or as an explicit failure, never absent.
inline const std::vector<CatalogEntry>& measure_catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"vcdim", MeasureCategory::kBaselineOutput},
        {"params", MeasureCategory::kBaselineOutput},
        {"magnitude", MeasureCategory::kBaselineOutput},
        {"cross_entropy", MeasureCategory::kBaselineOutput},
        {"negative_entropy", MeasureCategory::kBaselineOutput},
        {"inverse_margin_p10", MeasureCategory::kNormMargin},
        {"l2_over_margin_p10", MeasureCategory::kNormMargin},
        {"l1_over_margin_p10", MeasureCategory::kNormMargin},
        {"margin_normalized_param_norm", MeasureCategory::kNormMargin},
        {"spectral_norm_per_layer", MeasureCategory::kNormMargin},
        {"spec_sum", MeasureCategory::kNormMargin},
        {"spec_prod", MeasureCategory::kNormMargin},
        {"frobenius_distance", MeasureCategory::kNormMargin},
        {"path_norm", MeasureCategory::kNormMargin},
        {"fisher_rao_norm", MeasureCategory::kNormMargin},
        {"sharpness", MeasureCategory::kSharpness},
        {"adaptive_sharpness", MeasureCategory::kSharpness},
        {"sharpness_magnitude", MeasureCategory::kSharpness},
        {"sharpness_magnitude_init", MeasureCategory::kSharpness},
        {"sharpness_magflat", MeasureCategory::kSharpness},
        {"pac_bayes_bound", MeasureCategory::kSharpness},
        {"pac_bayes_magnitude", MeasureCategory::kSharpness},
        {"pac_bayes_magnitude_init", MeasureCategory::kSharpness},
        {"pac_bayes_magflat", MeasureCategory::kSharpness},
        {"flatness_proxy", MeasureCategory::kSharpness},
        {"hessian_top_eigenvalue", MeasureCategory::kSharpness},
        {"hessian_trace", MeasureCategory::kSharpness},
        {"gradient_noise_var", MeasureCategory::kOptimization},
        {"gradient_noise_final_var", MeasureCategory::kOptimization},
        {"gradient_noise_scale", MeasureCategory::kOptimization},
        {"gradient_norm", MeasureCategory::kOptimization},
        {"input_gradient_norm", MeasureCategory::kOptimization},
        {"aic_bias_term", MeasureCategory::kInformationCriteria},
        {"aicc_bias_term", MeasureCategory::kInformationCriteria},
        {"tic_bias_term", MeasureCategory::kInformationCriteria},
        {"tic_bias_term_bound", MeasureCategory::kInformationCriteria},
        {"waic_bias_term", MeasureCategory::kInformationCriteria},
        {"ece", MeasureCategory::kCalibration},
        {"mce", MeasureCategory::kCalibration},
        {"ace", MeasureCategory::kCalibration},
        {"reliability_diagram", MeasureCategory::kCalibration},
        {"temperature_scaling", MeasureCategory::kCalibration},
    };
    return entries;
}

inline bool is_measure_name(const std::string& name) {
    for (const auto& e : measure_catalog())
        if (name == e.name) return true;
    return false;
}

inline MeasureCategory category_of(const std::string& name) {
    for (const auto& e : measure_catalog())
        if (name == e.name) return e.category;
    throw Error("unknown measure name: " + name);
}

// Position in the canonical catalog order, for stable CSV sorting.
inline std::size_t catalog_index(const std::string& name) {
    const auto& cat = measure_catalog();
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (name == cat[i].name) return i;
    return cat.size();
}

inline std::string catalog_listing() {
    std::string out;
    for (const auto& e : measure_catalog()) {
        if (!out.empty()) out += ", ";
        out += e.name;
    }
    return out;
}

}  // namespace genmeter
