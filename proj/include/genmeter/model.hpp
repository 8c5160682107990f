#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "genmeter/autodiff.hpp"
#include "genmeter/data.hpp"
#include "genmeter/errors.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

enum class Mode { kTrain, kEval };
enum class InitScheme { kHe, kXavier };

inline InitScheme parse_init_scheme(const std::string& s) {
    if (s == "he") return InitScheme::kHe;
    if (s == "xavier") return InitScheme::kXavier;
    throw ConfigError("unknown init scheme: " + s);
}

inline const char* to_string(InitScheme s) {
    return s == InitScheme::kHe ? "he" : "xavier";
}

struct ModelSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_widths;
    int num_classes = 2;
    double dropout_p = 0.0;
    InitScheme init = InitScheme::kHe;

    void validate() const {
        if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
        if (num_classes < 2) throw ConfigError("model: need at least 2 classes");
        for (std::size_t w : hidden_widths)
            if (w == 0) throw ConfigError("model: zero hidden width");
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw ConfigError("model: dropout_p must be in [0, 1)");
    }

    // Layer l maps dims[l] -> dims[l+1]; the last layer emits logits.
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        for (std::size_t w : hidden_widths) dims.push_back(w);
        dims.push_back(static_cast<std::size_t>(num_classes));
        return dims;
    }

    std::size_t layer_count() const { return hidden_widths.size() + 1; }
};

struct ForwardResult {
    double mean_loss = 0.0;
    std::vector<double> per_sample_loss;
    Tensor logits;
};

struct GradResult {
    double mean_loss = 0.0;
    ParamVector grads;
};

struct InputGradResult {
    double mean_loss = 0.0;
    Tensor input_grads;  // d(mean loss)/dX, same shape as the batch inputs
};

struct EvalResult {
    double accuracy = 0.0;
    double mean_ce = 0.0;
    Tensor logits;  // n x K archive for margin/calibration measures
};

// Fully-connected ReLU classifier. Parameter segments are ordered
// w0, b0, w1, b1, ... and that order defines the flat coordinate layout used
// by every curvature routine.
class Mlp {
  public:
    explicit Mlp(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const ModelSpec& spec() const { return spec_; }

    std::size_t param_count() const {
        const auto dims = spec_.layer_dims();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
        return n;
    }

    // Weight init per scheme (biases zero):
    //   he      w ~ N(0, 2/fan_in)
    //   xavier  w ~ U(-a, a), a = sqrt(6/(fan_in+fan_out))
    ParamVector init_params(std::uint64_t seed) const {
        const auto dims = spec_.layer_dims();
        ParamVector p;
        Rng rng(derive_seed(seed, "init"));
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
            Tensor w = Tensor::matrix(fan_in, fan_out);
            if (spec_.init == InitScheme::kHe) {
                const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
                for (double& x : w.v) x = rng.normal(0.0, s);
            } else {
                const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
                for (double& x : w.v) x = rng.uniform(-a, a);
            }
            p.add("w" + std::to_string(l), std::move(w));
            p.add("b" + std::to_string(l), Tensor({fan_out}, 0.0));
        }
        return p;
    }

    void check_params(const ParamVector& params) const {
        const auto dims = spec_.layer_dims();
        if (params.segment_count() != 2 * (dims.size() - 1))
            throw ShapeError("param segment count does not match architecture");
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const auto& w = params.segment(2 * l).tensor;
            const auto& b = params.segment(2 * l + 1).tensor;
            if (w.shape != std::vector<std::size_t>{dims[l], dims[l + 1]})
                throw ShapeError("weight shape mismatch at layer " + std::to_string(l));
            if (b.shape != std::vector<std::size_t>{dims[l + 1]})
                throw ShapeError("bias shape mismatch at layer " + std::to_string(l));
        }
    }

    ForwardResult forward_loss(const ParamVector& params, const LabeledBatch& batch, Mode mode,
                               std::uint64_t dropout_seed = 0) const {
        Tape tape;
        Wired w = wire(tape, params, batch, mode, dropout_seed, /*inputs_need_grad=*/false);
        ForwardResult out;
        out.logits = tape.value(w.logits);
        out.per_sample_loss = tape.value(w.losses).v;
        out.mean_loss = tape.value(w.mean_loss)[0];
        return out;
    }

    GradResult grad(const ParamVector& params, const LabeledBatch& batch, Mode mode,
                    std::uint64_t dropout_seed = 0) const {
        Tape tape;
        Wired w = wire(tape, params, batch, mode, dropout_seed, /*inputs_need_grad=*/false);
        tape.backward(w.mean_loss);
        GradResult out;
        out.mean_loss = tape.value(w.mean_loss)[0];
        out.grads = params;
        for (std::size_t i = 0; i < params.segment_count(); ++i)
            out.grads.segment(i).tensor = tape.grad(w.param_ids[i]);
        return out;
    }

    // Per-sample gradients of the cross-entropy loss, eval mode (no dropout),
    // so their mean equals grad(..., Mode::kEval) up to rounding.
    std::vector<ParamVector> per_sample_grads(const ParamVector& params,
                                              const LabeledBatch& batch) const {
        std::vector<ParamVector> out;
        out.reserve(batch.size());
        const std::size_t d = batch.input_dim();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            LabeledBatch one;
            one.inputs = Tensor({1, d});
            for (std::size_t j = 0; j < d; ++j) one.inputs.at(0, j) = batch.inputs.at(i, j);
            one.labels = {batch.labels[i]};
            out.push_back(grad(params, one, Mode::kEval).grads);
        }
        return out;
    }

    // Gradient of the mean loss with respect to the inputs (eval mode).
    InputGradResult input_grad(const ParamVector& params, const LabeledBatch& batch) const {
        Tape tape;
        Wired w = wire(tape, params, batch, Mode::kEval, 0, /*inputs_need_grad=*/true);
        tape.backward(w.mean_loss);
        InputGradResult out;
        out.mean_loss = tape.value(w.mean_loss)[0];
        out.input_grads = tape.grad(w.input_id);
        return out;
    }

    // Accuracy + mean CE + logits archive, dropout disabled. Argmax ties break
    // toward the lowest class index.
    EvalResult evaluate(const ParamVector& params, const LabeledBatch& batch) const {
        ForwardResult fwd = forward_loss(params, batch, Mode::kEval);
        EvalResult out;
        out.mean_ce = fwd.mean_loss;
        out.logits = std::move(fwd.logits);
        std::size_t correct = 0;
        const std::size_t k = static_cast<std::size_t>(spec_.num_classes);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (out.logits.at(i, c) > out.logits.at(i, best)) best = c;
            if (best == static_cast<std::size_t>(batch.labels[i])) ++correct;
        }
        out.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
        return out;
    }

  private:
    struct Wired {
        Tape::VarId input_id;
        Tape::VarId logits;
        Tape::VarId losses;
        Tape::VarId mean_loss;
        std::vector<Tape::VarId> param_ids;
    };

    Wired wire(Tape& tape, const ParamVector& params, const LabeledBatch& batch, Mode mode,
               std::uint64_t dropout_seed, bool inputs_need_grad) const {
        validate_batch(batch, spec_.num_classes);
        check_params(params);
        if (batch.input_dim() != spec_.input_dim)
            throw ShapeError("batch input_dim does not match model");
        Wired w;
        w.input_id = tape.input(batch.inputs, inputs_need_grad);
        for (std::size_t i = 0; i < params.segment_count(); ++i)
            w.param_ids.push_back(tape.input(params.segment(i).tensor, true));
        Tape::VarId h = w.input_id;
        const std::size_t layers = spec_.layer_count();
        const bool use_dropout = mode == Mode::kTrain && spec_.dropout_p > 0.0;
        for (std::size_t l = 0; l < layers; ++l) {
            h = tape.add_rowvec(tape.matmul(h, w.param_ids[2 * l]), w.param_ids[2 * l + 1]);
            if (l + 1 < layers) {
                h = tape.relu(h);
                if (use_dropout)
                    h = tape.dropout(h, spec_.dropout_p, derive_seed(dropout_seed, "dropout", l));
            }
        }
        w.logits = h;
        w.losses = tape.softmax_ce(w.logits, batch.labels);
        w.mean_loss = tape.mean(w.losses);
        return w;
    }

    ModelSpec spec_;
};

}  // namespace genmeter
