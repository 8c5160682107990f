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
#include "genmeter/rng.hpp"

namespace genmeter {

// KL(N(mu, sq^2) || N(0, sp^2)) for scalars.
inline double kl_gaussian_scalar(double mu, double sq, double sp) {
    if (sq <= 0 || sp <= 0) throw Error("kl_gaussian_scalar: sigmas must be positive");
    double r = (sq * sq) / (sp * sp);
    return 0.5 * (mu * mu / (sp * sp) + r - 1.0 - std::log(r));
}

// Sum of coordinatewise Gaussian KL terms. Posterior sigmas are floored
// so coordinates with zero scale keep the sum finite.
inline double kl_diag_gaussian(const std::vector<double>& prior_mean_offset,
                               const std::vector<double>& sigma_q, double sigma_p,
                               double sigma_floor) {
    if (prior_mean_offset.size() != sigma_q.size())
        throw ShapeError("kl_diag_gaussian: dim mismatch");
    if (sigma_p <= 0 || sigma_floor <= 0) throw Error("kl_diag_gaussian: sigmas must be positive");
    double kl = 0.0;
    for (std::size_t i = 0; i < sigma_q.size(); ++i)
        kl += kl_gaussian_scalar(prior_mean_offset[i], std::max(sigma_q[i], sigma_floor), sigma_p);
    return kl;
}

enum class PacBayesKind { kIsotropic, kMagnitude, kMagnitudeInit, kMagnitudeFlat };

struct PacBayesResult {
    double bound = 0.0;
    double gibbs_error = 0.0;  // mean 0-1 error over posterior draws
    double kl = 0.0;
    int draws_used = 0;
    bool ok = false;
    std::string note;
};

// Generalization bound: Gibbs error of a Gaussian posterior around theta
// plus the KL complexity term sqrt((KL + ln(2 sqrt(n)/delta)) / (2n)).
//  - kIsotropic: additive noise sigma_post, prior centered at zero.
//  - kMagnitude: per-coordinate scale sigma_post*|theta_i|, prior at zero.
//  - kMagnitudeInit: same posterior, prior centered at the initialization.
//  - kMagnitudeFlat: multiplicative noise theta*(1 + sigma_post*z).
// error_fn evaluates the empirical 0-1 error of a parameter vector on the
// evaluation pool of size n.
inline PacBayesResult pac_bayes_bound(
    const std::function<double(const std::vector<double>&)>& error_fn,
    const std::vector<double>& theta, const std::optional<std::vector<double>>& init_flat,
    PacBayesKind kind, double sigma_post, double sigma_prior, double delta, int draws,
    std::size_t n, double sigma_floor, std::uint64_t seed) {
    if (n < 1) throw Error("pac_bayes_bound: empty evaluation pool");
    if (draws < 1) throw Error("pac_bayes_bound: draws must be >= 1");
    if (sigma_post <= 0 || sigma_prior <= 0) throw Error("pac_bayes_bound: sigmas must be positive");
    if (delta <= 0 || delta >= 1) throw Error("pac_bayes_bound: delta must be in (0,1)");

    std::vector<double> sigma_q(theta.size());
    if (kind == PacBayesKind::kIsotropic) {
        for (auto& s : sigma_q) s = sigma_post;
    } else {
        for (std::size_t i = 0; i < theta.size(); ++i) sigma_q[i] = sigma_post * std::abs(theta[i]);
    }

    std::vector<double> offset = theta;  // prior mean zero by default
    if (kind == PacBayesKind::kMagnitudeInit) {
        if (!init_flat.has_value()) throw Error("pac_bayes_bound: init required for this variant");
        if (init_flat->size() != theta.size()) throw ShapeError("pac_bayes_bound: init dim mismatch");
        for (std::size_t i = 0; i < theta.size(); ++i) offset[i] = theta[i] - (*init_flat)[i];
    }

    PacBayesResult res;
    res.kl = kl_diag_gaussian(offset, sigma_q, sigma_prior, sigma_floor);

    Rng rng(derive_seed(seed, "pac_bayes"));
    std::vector<double> shifted(theta.size());
    double err_acc = 0.0;
    int discarded = 0;
    for (int k = 0; k < draws; ++k) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            double z = rng.normal();
            if (kind == PacBayesKind::kMagnitudeFlat)
                shifted[i] = theta[i] * (1.0 + sigma_post * z);
            else
                shifted[i] = theta[i] + sigma_q[i] * z;
        }
        try {
            double e = error_fn(shifted);
            if (!std::isfinite(e)) {
                ++discarded;
                continue;
            }
            err_acc += e;
            ++res.draws_used;
        } catch (const NonFiniteError&) {
            ++discarded;
        }
    }
    if (res.draws_used == 0) {
        res.note = "all posterior draws non-finite";
        return res;
    }
    if (discarded > 0) res.note = std::to_string(discarded) + " posterior draws discarded";

    res.gibbs_error = err_acc / static_cast<double>(res.draws_used);
    double nd = static_cast<double>(n);
    double complexity = (res.kl + std::log(2.0 * std::sqrt(nd) / delta)) / (2.0 * nd);
    res.bound = res.gibbs_error + std::sqrt(complexity);
    res.ok = true;
    return res;
}

}  // namespace genmeter
