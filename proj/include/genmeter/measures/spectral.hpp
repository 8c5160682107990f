#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

struct SpectralEstimate {
    double value = 0.0;
    bool converged = false;
    int iters_used = 0;
};

// Largest singular value of a matrix, estimated by power iteration on
// A^T A. Convergence is |sigma_t - sigma_{t-1}| < tol. An exactly zero
// matrix short-circuits to sigma = 0.
inline SpectralEstimate spectral_norm_estimate(const Tensor& m, int max_iters, double tol,
                                               std::uint64_t seed) {
    if (m.shape.size() != 2) throw ShapeError("spectral_norm_estimate: need a 2-d tensor");
    if (max_iters < 1 || tol <= 0) throw Error("spectral_norm_estimate: bad iteration settings");
    std::size_t r = m.rows(), c = m.cols();

    Rng rng(derive_seed(seed, "spectral_pi"));
    std::vector<double> v(c);
    for (auto& x : v) x = rng.normal();
    double vn = l2_norm(v);
    if (vn == 0.0) {
        v.assign(c, 0.0);
        v[0] = 1.0;
        vn = 1.0;
    }
    for (auto& x : v) x /= vn;

    std::vector<double> av(r), atav(c);
    SpectralEstimate est;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += m.at(i, j) * v[j];
            av[i] = s;
        }
        double sigma = l2_norm(av);
        est.iters_used = it + 1;
        if (sigma < 1e-300) {
            est.value = 0.0;
            est.converged = true;
            return est;
        }
        est.value = sigma;
        if (std::abs(sigma - prev) < tol) {
            est.converged = true;
            return est;
        }
        prev = sigma;
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < r; ++i) s += m.at(i, j) * av[i];
            atav[j] = s;
        }
        double an = l2_norm(atav);
        if (an < 1e-300) {
            est.value = 0.0;
            est.converged = true;
            return est;
        }
        for (std::size_t j = 0; j < c; ++j) v[j] = atav[j] / an;
    }
    return est;  // not converged; caller decides what to do
}

struct LayerSpectra {
    std::vector<double> sigmas;  // one per weight matrix, input to output order
    bool all_converged = true;

    double sum() const {
        double s = 0.0;
        for (double x : sigmas) s += x;
        return s;
    }
    double mean() const {
        if (sigmas.empty()) throw Error("LayerSpectra::mean: no layers");
        return sum() / static_cast<double>(sigmas.size());
    }
    // Product in the log domain to dodge overflow for deep stacks.
    double product() const {
        double lg = 0.0;
        for (double x : sigmas) lg += std::log(x);
        return std::exp(lg);
    }
};

// Spectral norms of every weight matrix in a parameter vector laid out as
// alternating (weight, bias) segments.
inline LayerSpectra layer_spectral_norms(const ParamVector& params, int max_iters, double tol,
                                         std::uint64_t seed) {
    LayerSpectra out;
    std::size_t layer = 0;
    for (std::size_t i = 0; i < params.segment_count(); i += 2, ++layer) {
        auto est = spectral_norm_estimate(params.segment(i).tensor, max_iters, tol,
                                          derive_seed(seed, "layer", layer));
        if (!est.converged) out.all_converged = false;
        out.sigmas.push_back(est.value);
    }
    return out;
}

// Path norm for a ReLU chain: run the network with every weight and bias
// squared on an all-ones input and sum the output units. Captures the
// total squared path weight from inputs to outputs.
inline double path_norm(const ParamVector& params, std::size_t input_dim) {
    if (params.segment_count() == 0 || params.segment_count() % 2 != 0)
        throw ShapeError("path_norm: expected alternating weight/bias segments");
    std::vector<double> act(input_dim, 1.0);
    for (std::size_t i = 0; i < params.segment_count(); i += 2) {
        const Tensor& w = params.segment(i).tensor;
        const Tensor& b = params.segment(i + 1).tensor;
        if (w.rows() != act.size()) throw ShapeError("path_norm: layer input dim mismatch");
        std::size_t cols = w.cols();
        if (b.v.size() != cols) throw ShapeError("path_norm: bias dim mismatch");
        std::vector<double> next(cols, 0.0);
        for (std::size_t cidx = 0; cidx < cols; ++cidx) {
            double s = 0.0;
            for (std::size_t ridx = 0; ridx < act.size(); ++ridx)
                s += act[ridx] * w.at(ridx, cidx) * w.at(ridx, cidx);
            next[cidx] = s + b.v[cidx] * b.v[cidx];
        }
        act = std::move(next);
    }
    double out = 0.0;
    for (double x : act) out += x;
    return out;
}

// sqrt of the mean squared inner product between the parameter vector and
// per-sample loss gradients.
inline double fisher_rao_norm(const std::vector<double>& theta,
                              const std::vector<std::vector<double>>& per_sample_grads) {
    if (per_sample_grads.empty()) throw Error("fisher_rao_norm: no gradients");
    double acc = 0.0;
    for (const auto& g : per_sample_grads) {
        if (g.size() != theta.size()) throw ShapeError("fisher_rao_norm: gradient dim mismatch");
        double ip = dot(theta, g);
        acc += ip * ip;
    }
    return std::sqrt(acc / static_cast<double>(per_sample_grads.size()));
}

}  // namespace genmeter
