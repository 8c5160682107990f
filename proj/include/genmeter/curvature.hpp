#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// Flat-coordinate gradient closure: theta -> dL/dtheta.
using GradFn = std::function<std::vector<double>(const std::vector<double>&)>;
// Hessian-vector closure: v -> Hv, linear in v.
using HvpFn = std::function<std::vector<double>(const std::vector<double>&)>;

// Central-difference Hessian-vector product around theta:
//   Hv ~= (g(theta + eps v) - g(theta - eps v)) / (2 eps),
// eps = 1e-4 * (1 + ||theta||) / ||v||, so the probe displacement has a fixed
// scale relative to the parameters regardless of ||v||.
inline std::vector<double> hvp_fd(const GradFn& grad_fn, const std::vector<double>& theta,
                                  const std::vector<double>& v) {
    const double vn = l2_norm(v);
    if (vn == 0.0) throw Error("hvp: zero direction vector");
    const double eps = 1e-4 * (1.0 + l2_norm(theta)) / vn;
    std::vector<double> plus = theta, minus = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        plus[i] += eps * v[i];
        minus[i] -= eps * v[i];
    }
    std::vector<double> gp = grad_fn(plus);
    std::vector<double> gm = grad_fn(minus);
    std::vector<double> out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        out[i] = (gp[i] - gm[i]) / (2.0 * eps);
        require_finite(out[i], "hvp");
    }
    return out;
}

inline HvpFn make_hvp(GradFn grad_fn, std::vector<double> theta) {
    return [grad_fn = std::move(grad_fn), theta = std::move(theta)](const std::vector<double>& v) {
        return hvp_fd(grad_fn, theta, v);
    };
}

struct PowerIterResult {
    double value = 0.0;  // Rayleigh quotient of the last iterate
    bool converged = false;
    int iters_used = 0;
};

// Power iteration on the Hessian via HVPs. Converges toward the eigenvalue of
// largest magnitude; the returned Rayleigh quotient carries that eigenvalue's
// sign. Convergence: successive Rayleigh quotients differ by less than tol.
inline PowerIterResult power_iteration(const HvpFn& hvp, std::size_t dim, int iters, double tol,
                                       std::uint64_t seed) {
    if (dim == 0 || iters < 1) throw Error("power_iteration: bad arguments");
    Rng rng(seed);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    double vn = l2_norm(v);
    for (double& x : v) x /= vn;

    PowerIterResult res;
    double prev = 0.0;
    for (int t = 0; t < iters; ++t) {
        std::vector<double> w = hvp(v);
        double lambda = dot(v, w);  // ||v|| == 1
        res.value = lambda;
        res.iters_used = t + 1;
        const double wn = l2_norm(w);
        if (wn < 1e-300) {
            // Hv ~ 0 in this direction: treat as a (near) null Hessian.
            res.value = 0.0;
            res.converged = true;
            return res;
        }
        if (t > 0 && std::fabs(lambda - prev) < tol) {
            res.converged = true;
            return res;
        }
        prev = lambda;
        for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
    }
    return res;
}

// Hutchinson trace estimate: (1/S) sum_s v_s^T H v_s with Rademacher v_s.
inline double hutchinson_trace(const HvpFn& hvp, std::size_t dim, int samples,
                               std::uint64_t seed) {
    if (samples < 1) throw Error("hutchinson_trace: need at least 1 sample");
    Rng rng(seed);
    double acc = 0.0;
    std::vector<double> v(dim);
    for (int s = 0; s < samples; ++s) {
        for (double& x : v) x = rng.rademacher();
        acc += dot(v, hvp(v));
    }
    return acc / samples;
}

// Exact diagonal by unit-vector probes: diag_j = (H e_j)_j. One HVP per
// coordinate, intended for small parameter counts.
inline std::vector<double> hessian_diag_exact(const HvpFn& hvp, std::size_t dim) {
    std::vector<double> diag(dim);
    std::vector<double> e(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        e[j] = 1.0;
        diag[j] = hvp(e)[j];
        e[j] = 0.0;
    }
    return diag;
}

// Stochastic diagonal: E[v o Hv] = diag(H) for Rademacher v.
inline std::vector<double> hessian_diag_stochastic(const HvpFn& hvp, std::size_t dim, int samples,
                                                   std::uint64_t seed) {
    if (samples < 1) throw Error("hessian_diag: need at least 1 sample");
    Rng rng(seed);
    std::vector<double> diag(dim, 0.0), v(dim);
    for (int s = 0; s < samples; ++s) {
        for (double& x : v) x = rng.rademacher();
        std::vector<double> hv = hvp(v);
        for (std::size_t j = 0; j < dim; ++j) diag[j] += v[j] * hv[j];
    }
    for (double& x : diag) x /= samples;
    return diag;
}

}  // namespace genmeter
