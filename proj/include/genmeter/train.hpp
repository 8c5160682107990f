#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "genmeter/data.hpp"
#include "genmeter/errors.hpp"
#include "genmeter/measures/catalog.hpp"
#include "genmeter/model.hpp"
#include "genmeter/optim.hpp"
#include "genmeter/params.hpp"
#include "genmeter/rng.hpp"

namespace genmeter {

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::kSgd;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    int epochs = 30;
    std::uint64_t seed = 0;
};

// How many per-epoch gradient snapshots the record retains (most recent
// epochs) for the training-time gradient-noise measure.
inline constexpr std::size_t kGradSnapshotWindow = 10;

// Everything one trained configuration produces. Immutable once persisted;
// the measures map is the only part filled in after training (as an
// append-only patch in the store).
struct RunRecord {
    std::string run_id;                              // assigned by the sweep layer
    std::map<std::string, std::string> assignment;   // axis name -> exact token
    ModelSpec model;
    TrainConfig train_cfg;
    ParamVector init_params;   // snapshot before the first step
    ParamVector final_params;
    double train_acc = 0.0;
    double test_acc_iid = 0.0;
    std::map<int, double> test_acc_shift;  // severity 1..5 -> accuracy
    std::vector<double> epoch_losses;      // mean training loss per epoch
    std::vector<double> grad_norm_trace;   // global grad norm at each epoch's first batch
    std::vector<std::vector<double>> grad_snapshots;  // first-batch grads, last epochs
    double wall_time_sec = 0.0;
    bool failed = false;
    std::string failure_reason;
    std::map<std::string, MeasureValue> measures;

    double gap_iid() const { return train_acc - test_acc_iid; }
    double gap_shift(int severity) const { return train_acc - test_acc_shift.at(severity); }
};

namespace detail {

inline LabeledBatch slice_batch(const LabeledBatch& pool, const std::vector<std::size_t>& order,
                                std::size_t begin, std::size_t end) {
    const std::size_t d = pool.input_dim();
    LabeledBatch out;
    out.inputs = Tensor({end - begin, d});
    out.labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        for (std::size_t j = 0; j < d; ++j) out.inputs.at(i - begin, j) = pool.inputs.at(src, j);
        out.labels[i - begin] = pool.labels[src];
    }
    return out;
}

}  // namespace detail

// Trains one configuration to completion and evaluates it on every split.
// Fully deterministic per cfg.seed. A non-finite loss or gradient marks the
// record failed (with the epoch in the reason) instead of aborting the sweep.
inline RunRecord train_run(const DatasetBundle& data, const ModelSpec& model_spec,
                           const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();

    Mlp mlp(model_spec);
    RunRecord rec;
    rec.model = model_spec;
    rec.train_cfg = cfg;
    rec.init_params = mlp.init_params(cfg.seed);
    rec.final_params = rec.init_params;

    OptimConfig ocfg;
    ocfg.kind = cfg.optimizer;
    ocfg.lr = cfg.learning_rate;
    ocfg.weight_decay = cfg.weight_decay;
    Optimizer opt(ocfg, rec.init_params.dim());

    std::vector<double> theta = rec.init_params.flatten();
    ParamVector params = rec.init_params;
    const std::size_t n = data.train.size();
    std::vector<std::size_t> order(n);
    std::deque<std::vector<double>> snapshots;
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs && !rec.failed; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        try {
            for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
                const std::size_t end = std::min(begin + cfg.batch_size, n);
                LabeledBatch batch = detail::slice_batch(data.train, order, begin, end);
                params.unflatten(theta);
                GradResult g = mlp.grad(params, batch, Mode::kTrain,
                                        derive_seed(cfg.seed, "dropout_step", step));
                loss_sum += g.mean_loss * static_cast<double>(end - begin);
                std::vector<double> flat_grad = g.grads.flatten();
                if (begin == 0) {
                    rec.grad_norm_trace.push_back(l2_norm(flat_grad));
                    snapshots.push_back(flat_grad);
                    if (snapshots.size() > kGradSnapshotWindow) snapshots.pop_front();
                }
                opt.step(theta, flat_grad);
                ++step;
            }
            const double epoch_loss = loss_sum / static_cast<double>(n);
            require_finite(epoch_loss, "epoch loss");
            rec.epoch_losses.push_back(epoch_loss);
        } catch (const NonFiniteError& e) {
            rec.failed = true;
            rec.failure_reason =
                "diverged at epoch " + std::to_string(epoch) + ": " + e.what();
        }
    }

    rec.grad_snapshots.assign(snapshots.begin(), snapshots.end());
    if (!rec.failed) {
        params.unflatten(theta);
        rec.final_params = params;
        rec.train_acc = mlp.evaluate(params, data.train).accuracy;
        rec.test_acc_iid = mlp.evaluate(params, data.test_iid).accuracy;
        for (const auto& [severity, pool] : data.test_shifted)
            rec.test_acc_shift[severity] = mlp.evaluate(params, pool).accuracy;
    }
    rec.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace genmeter
