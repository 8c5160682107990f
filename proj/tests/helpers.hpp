#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "genmeter/curvature.hpp"
#include "genmeter/data.hpp"
#include "genmeter/model.hpp"
#include "genmeter/rng.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static int counter = 0;
        const auto base = std::filesystem::temp_directory_path();
        const std::string stem =
            "genmeter_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
        path = base / stem;
        if (!std::filesystem::create_directory(path))
            throw std::runtime_error("TempDir: cannot create " + path.string());
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

using LossFn = std::function<double(const std::vector<double>&)>;

// Central finite differences, the reference gradient for all gradchecks.
inline std::vector<double> fd_gradient(const LossFn& loss, const std::vector<double>& theta,
                                       double h = 1e-5) {
    std::vector<double> g(theta.size());
    std::vector<double> t = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        t[i] = theta[i] + h;
        const double lp = loss(t);
        t[i] = theta[i] - h;
        const double lm = loss(t);
        t[i] = theta[i];
        g[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = 1.0 + std::max(std::fabs(a[i]), std::fabs(b[i]));
        worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
    }
    return worst;
}

// Gradient closure of the quadratic L = 0.5 * theta^T diag(a) theta.
inline genmeter::GradFn quadratic_grad(std::vector<double> diag) {
    return [diag = std::move(diag)](const std::vector<double>& theta) {
        std::vector<double> g(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) g[i] = diag[i] * theta[i];
        return g;
    };
}

inline genmeter::LabeledBatch random_batch(genmeter::Rng& rng, std::size_t n, std::size_t d,
                                           int num_classes) {
    genmeter::LabeledBatch b;
    b.inputs = genmeter::Tensor({n, d});
    for (double& x : b.inputs.v) x = rng.normal();
    b.labels.resize(n);
    for (auto& y : b.labels) y = static_cast<int>(rng.index(num_classes));
    return b;
}

inline genmeter::ModelSpec tiny_spec(std::size_t d, std::vector<std::size_t> hidden, int k,
                                     double dropout = 0.0) {
    genmeter::ModelSpec s;
    s.input_dim = d;
    s.hidden_widths = std::move(hidden);
    s.num_classes = k;
    s.dropout_p = dropout;
    return s;
}

// Independent plain-loop forward pass; returns the smallest |preactivation|
// over all hidden units. Central differences are only a valid gradient oracle
// when every ReLU input stays on one side of zero across the probe window, so
// gradcheck fixtures resample until this gap clears a margin.
inline double min_relu_gap(const genmeter::Mlp& mlp, const genmeter::ParamVector& p,
                           const genmeter::LabeledBatch& batch) {
    const auto dims = mlp.spec().layer_dims();
    std::vector<std::vector<double>> act(batch.size(),
                                         std::vector<double>(batch.inputs.cols()));
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t j = 0; j < batch.inputs.cols(); ++j)
            act[i][j] = batch.inputs.at(i, j);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto& w = p.segment(2 * l).tensor;
        const auto& b = p.segment(2 * l + 1).tensor;
        std::vector<std::vector<double>> next(batch.size(), std::vector<double>(dims[l + 1]));
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (std::size_t c = 0; c < dims[l + 1]; ++c) {
                double s = b[c];
                for (std::size_t r = 0; r < dims[l]; ++r) s += act[i][r] * w.at(r, c);
                if (l + 2 < dims.size()) {
                    gap = std::min(gap, std::fabs(s));
                    s = std::max(s, 0.0);
                }
                next[i][c] = s;
            }
        act = std::move(next);
    }
    return gap;
}

// Batch whose forward pass keeps every ReLU input at least `margin` from the
// kink, so finite differences with h << margin are trustworthy.
inline genmeter::LabeledBatch smooth_batch(const genmeter::Mlp& mlp,
                                           const genmeter::ParamVector& p, genmeter::Rng& rng,
                                           std::size_t n, int num_classes,
                                           double margin = 1e-3) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        genmeter::LabeledBatch b = random_batch(rng, n, mlp.spec().input_dim, num_classes);
        if (min_relu_gap(mlp, p, b) > margin) return b;
    }
    throw std::runtime_error("smooth_batch: could not find a kink-free batch");
}

}  // namespace testutil
