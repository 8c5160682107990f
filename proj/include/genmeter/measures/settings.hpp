#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "genmeter/errors.hpp"
#include "genmeter/summary.hpp"

namespace genmeter {

// Every tunable a measure consumes, with its default. All of these are
// exposed through the [measures] section of the sweep config.
struct MeasureSettings {
    // numeric floors
    double eps_margin = 1e-6;  // margin clip
    double eps_gns = 1e-12;    // gradient-noise-scale denominator
    double eps_tic = 1e-8;     // information-criterion trace denominator
    double eps_scale = 1e-3;   // magnitude-aware perturbation offset
    double eps_var = 1e-8;     // posterior sigma floor inside KL terms

    // sharpness family
    double sam_rho = 0.05;
    int adaptive_radius_count = 5;           // log-spaced radii
    double adaptive_radius_min = 1e-3;
    double adaptive_radius_max = 1e-1;
    double noise_r = 0.1;                    // perturbation scale
    int noise_samples = 3;
    AggKind noise_agg = AggKind::kMax;       // max (default) or mean

    // curvature
    int hutchinson_samples = 50;
    int power_iters = 100;
    double power_tol = 1e-6;
    std::size_t exact_diag_limit = 4096;     // exact Hessian diagonal below this d

    // flatness proxy
    double flatness_lambda = 1e-3;
    AggKind flatness_agg = AggKind::kMean;   // mean/median/harmonic_mean

    // gradient history at measure time
    int eval_batches = 10;                   // B
    std::size_t eval_batch_size = 32;
    AggKind gradient_norm_agg = AggKind::kMean;  // mean/max/std/median

    // posterior for PAC-Bayes and WAIC
    int posterior_samples = 8;   // S_post
    double sigma_post = 0.01;
    double sigma_prior = 0.1;
    double delta = 0.05;

    // calibration
    int calibration_bins = 15;

    void validate() const {
        if (eps_margin <= 0 || eps_tic < 0 || eps_scale <= 0 || eps_var <= 0 || eps_gns <= 0)
            throw ConfigError("measures: epsilon constants must be positive");
        if (sam_rho <= 0) throw ConfigError("measures: sam_rho must be positive");
        if (adaptive_radius_count < 2)
            throw ConfigError("measures: need at least 2 adaptive radii");
        if (adaptive_radius_min <= 0 || adaptive_radius_max <= adaptive_radius_min)
            throw ConfigError("measures: bad adaptive radius range");
        if (noise_samples < 1) throw ConfigError("measures: noise_samples must be >= 1");
        if (noise_agg != AggKind::kMax && noise_agg != AggKind::kMean)
            throw ConfigError("measures: noise_agg must be max or mean");
        if (flatness_lambda <= 0) throw ConfigError("measures: flatness_lambda must be positive");
        if (flatness_agg == AggKind::kMax || flatness_agg == AggKind::kStd)
            throw ConfigError("measures: flatness_agg must be mean, median, or harmonic_mean");
        if (hutchinson_samples < 1 || power_iters < 1 || power_tol <= 0)
            throw ConfigError("measures: bad curvature settings");
        if (eval_batches < 2) throw ConfigError("measures: eval_batches must be >= 2");
        if (eval_batch_size < 1) throw ConfigError("measures: eval_batch_size must be >= 1");
        if (posterior_samples < 2) throw ConfigError("measures: posterior_samples must be >= 2");
        if (sigma_post <= 0 || sigma_prior <= 0)
            throw ConfigError("measures: posterior sigmas must be positive");
        if (delta <= 0 || delta >= 1) throw ConfigError("measures: delta must be in (0,1)");
        if (calibration_bins < 1) throw ConfigError("measures: calibration_bins must be >= 1");
    }
};

}  // namespace genmeter
