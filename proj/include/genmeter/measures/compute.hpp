#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "genmeter/curvature.hpp"
#include "genmeter/data.hpp"
#include "genmeter/errors.hpp"
#include "genmeter/measures/calibration.hpp"
#include "genmeter/measures/catalog.hpp"
#include "genmeter/measures/gradients.hpp"
#include "genmeter/measures/info_criteria.hpp"
#include "genmeter/measures/margins.hpp"
#include "genmeter/measures/pac_bayes.hpp"
#include "genmeter/measures/settings.hpp"
#include "genmeter/measures/sharpness.hpp"
#include "genmeter/measures/spectral.hpp"
#include "genmeter/model.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/summary.hpp"
#include "genmeter/train.hpp"

namespace genmeter {

// Deterministic evaluation batches: shuffle the pool per pass and cut
// consecutive chunks, reshuffling with a fresh derived seed whenever the
// pool is exhausted.
inline std::vector<LabeledBatch> make_eval_batches(const LabeledBatch& pool,
                                                   std::size_t batch_size, int count,
                                                   std::uint64_t seed) {
    if (pool.size() == 0) throw Error("make_eval_batches: empty pool");
    if (batch_size < 1 || count < 1) throw Error("make_eval_batches: bad batch settings");
    batch_size = std::min(batch_size, pool.size());
    std::vector<LabeledBatch> out;
    std::vector<std::size_t> order(pool.size());
    std::size_t pos = 0;
    std::uint64_t pass = 0;
    for (int b = 0; b < count; ++b) {
        if (b == 0 || pos + batch_size > order.size()) {
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(derive_seed(seed, "eval_batches", pass++));
            rng.shuffle(order);
            pos = 0;
        }
        LabeledBatch batch;
        std::size_t d = pool.input_dim();
        batch.inputs = Tensor({batch_size, d}, 0.0);
        batch.labels.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            std::size_t src = order[pos + i];
            for (std::size_t j = 0; j < d; ++j) batch.inputs.at(i, j) = pool.inputs.at(src, j);
            batch.labels[i] = pool.labels[src];
        }
        pos += batch_size;
        out.push_back(std::move(batch));
    }
    return out;
}

// Selects measures by exact name or by category token. Empty = all.
struct MeasureFilter {
    std::vector<std::string> tokens;

    bool selects(const CatalogEntry& e) const {
        if (tokens.empty()) return true;
        for (const auto& t : tokens) {
            if (t == e.name) return true;
            MeasureCategory cat;
            if (parse_category(t, cat) && cat == e.category) return true;
        }
        return false;
    }

    void validate() const {
        for (const auto& t : tokens) {
            MeasureCategory cat;
            if (!is_measure_name(t) && !parse_category(t, cat))
                throw ConfigError("unknown measure or category: " + t);
        }
    }
};

namespace detail {

// Shared per-run intermediates, built lazily so a filtered computation
// only pays for what it touches. Builders throw on failure; the caller
// converts exceptions into per-measure failure records.
class MeasureWorkspace {
  public:
    MeasureWorkspace(const RunRecord& rec, const DatasetBundle& data, const MeasureSettings& st)
        : rec_(rec), st_(st), pool_(data.train), mlp_(rec.model) {
        theta_ = rec.final_params.flatten();
        init_flat_ = rec.init_params.flatten();
    }

    const RunRecord& rec() const { return rec_; }
    const MeasureSettings& st() const { return st_; }
    const LabeledBatch& pool() const { return pool_; }
    const Mlp& mlp() const { return mlp_; }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<double>& init_flat() const { return init_flat_; }
    std::size_t param_dim() const { return theta_.size(); }

    const EvalResult& eval() {
        if (!eval_) eval_ = mlp_.evaluate(rec_.final_params, pool_);
        return *eval_;
    }

    const PredictionArchive& archive() {
        if (!archive_) archive_ = prediction_archive(eval().logits, pool_.labels);
        return *archive_;
    }

    const MarginStats& margins() {
        if (!margins_) margins_ = margin_stats(eval().logits, pool_.labels);
        return *margins_;
    }

    const LayerSpectra& spectra() {
        if (!spectra_) {
            spectra_ = layer_spectral_norms(rec_.final_params, st_.power_iters, st_.power_tol,
                                            derive_seed(rec_.train_cfg.seed, "spectral"));
            if (!spectra_->all_converged)
                throw Error("spectral norm power iteration did not converge");
        }
        if (!spectra_->all_converged)
            throw Error("spectral norm power iteration did not converge");
        return *spectra_;
    }

    const std::vector<std::vector<double>>& per_sample_grads() {
        if (!psg_) {
            auto grads = mlp_.per_sample_grads(rec_.final_params, pool_);
            psg_.emplace();
            psg_->reserve(grads.size());
            for (auto& g : grads) psg_->push_back(g.flatten());
        }
        return *psg_;
    }

    const std::vector<LabeledBatch>& eval_batches() {
        if (!batches_)
            batches_ = make_eval_batches(pool_, st_.eval_batch_size, st_.eval_batches,
                                         derive_seed(rec_.train_cfg.seed, "measure_batches"));
        return *batches_;
    }

    // Per-batch gradients of the mean loss at the final parameters.
    const std::vector<std::vector<double>>& batch_grads() {
        if (!batch_grads_) {
            batch_grads_.emplace();
            batch_norms_.emplace();
            for (const auto& b : eval_batches()) {
                auto g = mlp_.grad(rec_.final_params, b, Mode::kEval).grads.flatten();
                batch_norms_->push_back(l2_norm(g));
                batch_grads_->push_back(std::move(g));
            }
        }
        return *batch_grads_;
    }

    const std::vector<double>& batch_norms() {
        batch_grads();
        return *batch_norms_;
    }

    std::vector<BatchObjective> batch_objectives() {
        std::vector<BatchObjective> out;
        for (const auto& b : eval_batches()) {
            const LabeledBatch* bp = &b;  // elements are stable in the workspace
            out.push_back(BatchObjective{
                [this, bp](const std::vector<double>& th) {
                    return mlp_.forward_loss(rec_.final_params.with_flat(th), *bp, Mode::kEval)
                        .mean_loss;
                },
                [this, bp](const std::vector<double>& th) {
                    return mlp_.grad(rec_.final_params.with_flat(th), *bp, Mode::kEval)
                        .grads.flatten();
                }});
        }
        return out;
    }

    std::function<double(const std::vector<double>&)> pool_loss_fn() {
        return [this](const std::vector<double>& th) {
            return mlp_.forward_loss(rec_.final_params.with_flat(th), pool_, Mode::kEval).mean_loss;
        };
    }

    std::function<double(const std::vector<double>&)> pool_error_fn() {
        return [this](const std::vector<double>& th) {
            return 1.0 - mlp_.evaluate(rec_.final_params.with_flat(th), pool_).accuracy;
        };
    }

    // Gradient closure of the mean loss on a fixed batch, used by the
    // finite-difference Hessian probes.
    GradFn batch_grad_fn(const LabeledBatch* b) {
        return [this, b](const std::vector<double>& th) {
            return mlp_.grad(rec_.final_params.with_flat(th), *b, Mode::kEval).grads.flatten();
        };
    }

    GradFn pool_grad_fn() {
        return [this](const std::vector<double>& th) {
            return mlp_.grad(rec_.final_params.with_flat(th), pool_, Mode::kEval).grads.flatten();
        };
    }

    // Empirical Fisher diagonal: mean squared per-sample gradient.
    const std::vector<double>& fisher_diag() {
        if (!fisher_diag_) {
            const auto& psg = per_sample_grads();
            fisher_diag_.emplace(param_dim(), 0.0);
            for (const auto& g : psg)
                for (std::size_t i = 0; i < g.size(); ++i) (*fisher_diag_)[i] += g[i] * g[i];
            for (auto& v : *fisher_diag_) v /= static_cast<double>(psg.size());
        }
        return *fisher_diag_;
    }

    // Hessian diagonal of the mean pool loss, exact for small models. The
    // stochastic fallback seeds from the run so the cached value does not
    // depend on which measure asked first.
    const std::vector<double>& hessian_diag() {
        if (!hessian_diag_) {
            HvpFn hvp = make_hvp(pool_grad_fn(), theta_);
            if (param_dim() <= st_.exact_diag_limit)
                hessian_diag_ = hessian_diag_exact(hvp, param_dim());
            else
                hessian_diag_ = hessian_diag_stochastic(
                    hvp, param_dim(), st_.hutchinson_samples,
                    derive_seed(rec_.train_cfg.seed, "hessian_diag"));
        }
        return *hessian_diag_;
    }

    // Per-draw, per-sample log likelihoods under the posterior used by
    // the functional-variance penalty. Monte-Carlo dropout when the model
    // trains with dropout, Gaussian weight noise otherwise.
    std::vector<std::vector<double>> posterior_log_liks(std::uint64_t seed) {
        std::vector<std::vector<double>> rows;
        bool use_dropout = rec_.model.dropout_p > 0.0;
        Rng rng(derive_seed(seed, "posterior"));
        for (int s = 0; s < st_.posterior_samples; ++s) {
            ForwardResult fr;
            if (use_dropout) {
                fr = mlp_.forward_loss(rec_.final_params, pool_, Mode::kTrain,
                                       derive_seed(seed, "draw", static_cast<std::uint64_t>(s)));
            } else {
                std::vector<double> shifted = theta_;
                for (auto& v : shifted) v += st_.sigma_post * rng.normal();
                fr = mlp_.forward_loss(rec_.final_params.with_flat(shifted), pool_, Mode::kEval);
            }
            std::vector<double> row(fr.per_sample_loss.size());
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = -fr.per_sample_loss[i];
            rows.push_back(std::move(row));
        }
        return rows;
    }

    double l2_over_margin() {
        if (!l2_over_margin_)
            l2_over_margin_ =
                norm_over_margin(l2_norm(theta_), margins().q10, st_.eps_margin);
        return *l2_over_margin_;
    }

  private:
    const RunRecord& rec_;
    const MeasureSettings& st_;
    const LabeledBatch& pool_;
    Mlp mlp_;
    std::vector<double> theta_;
    std::vector<double> init_flat_;

    std::optional<EvalResult> eval_;
    std::optional<PredictionArchive> archive_;
    std::optional<MarginStats> margins_;
    std::optional<LayerSpectra> spectra_;
    std::optional<std::vector<std::vector<double>>> psg_;
    std::optional<std::vector<LabeledBatch>> batches_;
    std::optional<std::vector<std::vector<double>>> batch_grads_;
    std::optional<std::vector<double>> batch_norms_;
    std::optional<std::vector<double>> fisher_diag_;
    std::optional<std::vector<double>> hessian_diag_;
    std::optional<double> l2_over_margin_;
};

inline double compute_one(MeasureWorkspace& ws, const std::string& name, std::uint64_t seed,
                          std::string& detail) {
    const MeasureSettings& st = ws.st();
    const RunRecord& rec = ws.rec();
    double w = static_cast<double>(ws.param_dim());

    if (name == "vcdim") return w * std::log(w);
    if (name == "params") return w;
    if (name == "magnitude") return l2_norm(ws.theta());
    if (name == "cross_entropy") return ws.eval().mean_ce;
    if (name == "negative_entropy") {
        const auto& probs = ws.archive().probs;
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.rows(); ++i)
            for (std::size_t c = 0; c < probs.cols(); ++c) {
                double p = probs.at(i, c);
                if (p > 0.0) acc += p * std::log(p);
            }
        return acc / static_cast<double>(probs.rows());
    }

    if (name == "inverse_margin_p10") return inverse_margin(ws.margins().q10, st.eps_margin);
    if (name == "l2_over_margin_p10") return ws.l2_over_margin();
    if (name == "l1_over_margin_p10")
        return norm_over_margin(l1_norm(ws.theta()), ws.margins().q10, st.eps_margin);
    if (name == "margin_normalized_param_norm") return ws.l2_over_margin();
    if (name == "spectral_norm_per_layer") return ws.spectra().mean();
    if (name == "spec_sum") return ws.spectra().sum();
    if (name == "spec_prod") return ws.spectra().product();
    if (name == "frobenius_distance") {
        std::vector<double> diff = ws.theta();
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= ws.init_flat()[i];
        return l2_norm(diff);
    }
    if (name == "path_norm")
        return path_norm(rec.final_params, static_cast<std::size_t>(rec.model.input_dim));
    if (name == "fisher_rao_norm") return fisher_rao_norm(ws.theta(), ws.per_sample_grads());

    if (name == "sharpness") {
        auto objs = ws.batch_objectives();
        SamResult s = sam_sharpness(objs, ws.theta(), st.sam_rho);
        if (s.all_degenerate) throw Error("all batches degenerate");
        return s.value;
    }
    if (name == "adaptive_sharpness") {
        auto objs = ws.batch_objectives();
        auto radii =
            log_spaced(st.adaptive_radius_min, st.adaptive_radius_max, st.adaptive_radius_count);
        auto a = adaptive_sharpness(objs, ws.theta(), radii);
        if (!a.ok) throw Error("all radii degenerate");
        return a.value;
    }
    if (name == "sharpness_magnitude" || name == "sharpness_magnitude_init" ||
        name == "sharpness_magflat") {
        NoiseKind kind = NoiseKind::kMagnitude;
        std::optional<std::vector<double>> init;
        if (name == "sharpness_magnitude_init") {
            kind = NoiseKind::kMagnitudeInit;
            init = ws.init_flat();
        } else if (name == "sharpness_magflat") {
            kind = NoiseKind::kMagnitudeFlat;
        }
        auto r = noise_sharpness(ws.pool_loss_fn(), rec.final_params, init, kind, st.noise_r,
                                 st.noise_samples, st.noise_agg, st.eps_scale, seed);
        if (!r.ok) throw Error(r.note.empty() ? "perturbation failed" : r.note);
        if (!r.note.empty()) detail = r.note;
        return r.value;
    }
    if (name == "pac_bayes_bound" || name == "pac_bayes_magnitude" ||
        name == "pac_bayes_magnitude_init" || name == "pac_bayes_magflat") {
        PacBayesKind kind = PacBayesKind::kIsotropic;
        std::optional<std::vector<double>> init;
        if (name == "pac_bayes_magnitude") kind = PacBayesKind::kMagnitude;
        if (name == "pac_bayes_magnitude_init") {
            kind = PacBayesKind::kMagnitudeInit;
            init = ws.init_flat();
        }
        if (name == "pac_bayes_magflat") kind = PacBayesKind::kMagnitudeFlat;
        auto r = pac_bayes_bound(ws.pool_error_fn(), ws.theta(), init, kind, st.sigma_post,
                                 st.sigma_prior, st.delta, st.posterior_samples, ws.pool().size(),
                                 st.eps_var, seed);
        if (!r.ok) throw Error(r.note.empty() ? "posterior evaluation failed" : r.note);
        if (!r.note.empty()) detail = r.note;
        return r.bound;
    }
    if (name == "flatness_proxy")
        return flatness_proxy(ws.batch_grads(), st.flatness_lambda, st.flatness_agg);
    if (name == "hessian_top_eigenvalue") {
        HvpFn hvp = make_hvp(ws.batch_grad_fn(&ws.eval_batches().front()), ws.theta());
        auto r = power_iteration(hvp, ws.param_dim(), st.power_iters, st.power_tol, seed);
        if (!r.converged) throw Error("power iteration did not converge");
        return r.value;
    }
    if (name == "hessian_trace") {
        HvpFn hvp = make_hvp(ws.batch_grad_fn(&ws.eval_batches().front()), ws.theta());
        return hutchinson_trace(hvp, ws.param_dim(), st.hutchinson_samples, seed);
    }

    if (name == "gradient_noise_var") {
        if (rec.grad_snapshots.size() < 2)
            throw Error("fewer than 2 training gradient snapshots");
        return mean_coordinate_variance(rec.grad_snapshots);
    }
    if (name == "gradient_noise_final_var") return mean_coordinate_variance(ws.batch_grads());
    if (name == "gradient_noise_scale") return gradient_noise_scale(ws.batch_grads(), st.eps_gns);
    if (name == "gradient_norm") return aggregate(ws.batch_norms(), st.gradient_norm_agg);
    if (name == "input_gradient_norm") {
        double acc = 0.0;
        for (const auto& b : ws.eval_batches()) {
            auto ig = ws.mlp().input_grad(rec.final_params, b);
            acc += l2_norm(ig.input_grads.v);
        }
        return acc / static_cast<double>(ws.eval_batches().size());
    }

    if (name == "aic_bias_term") return aic_bias(ws.param_dim());
    if (name == "aicc_bias_term") {
        auto v = aicc_bias(ws.param_dim(), ws.pool().size());
        if (!v) throw Error("sample size too small for the correction");
        return *v;
    }
    if (name == "tic_bias_term")
        return tic_bias_from_diags(ws.fisher_diag(), ws.hessian_diag(), st.eps_tic);
    if (name == "tic_bias_term_bound")
        return tic_bound_from_diags(ws.fisher_diag(), ws.hessian_diag(), st.eps_tic);
    if (name == "waic_bias_term") return waic_bias(ws.posterior_log_liks(seed));

    if (name == "ece") return expected_calibration_error(ws.archive(), st.calibration_bins);
    if (name == "mce") return max_calibration_error(ws.archive(), st.calibration_bins);
    if (name == "ace") return adaptive_calibration_error(ws.archive(), st.calibration_bins);
    if (name == "reliability_diagram") return reliability_gap(ws.archive(), st.calibration_bins);
    if (name == "temperature_scaling")
        return temperature_scale(ws.eval().logits, ws.pool().labels, st.calibration_bins)
            .ece_after;

    throw Error("unknown measure: " + name);
}

}  // namespace detail

// Computes the selected measures for one trained run against the train
// split of its dataset. Every selected catalog entry yields a record:
// value on success, an explicit failure with a reason otherwise.
inline std::vector<MeasureValue> compute_measures(const RunRecord& rec, const DatasetBundle& data,
                                                  const MeasureSettings& settings,
                                                  const MeasureFilter& filter = {}) {
    settings.validate();
    filter.validate();

    std::vector<MeasureValue> out;
    if (rec.failed) {
        for (const auto& e : measure_catalog()) {
            if (!filter.selects(e)) continue;
            out.push_back(MeasureValue::failure(e.name, e.category, "training run failed", 0));
        }
        return out;
    }

    detail::MeasureWorkspace ws(rec, data, settings);
    for (const auto& e : measure_catalog()) {
        if (!filter.selects(e)) continue;
        std::uint64_t seed = derive_seed(rec.train_cfg.seed, e.name);
        std::string note;
        try {
            double v = detail::compute_one(ws, e.name, seed, note);
            MeasureValue mv = MeasureValue::success(e.name, e.category, v, seed);
            if (mv.ok && !note.empty()) mv.detail = note;
            out.push_back(std::move(mv));
        } catch (const std::exception& ex) {
            out.push_back(MeasureValue::failure(e.name, e.category, ex.what(), seed));
        }
    }
    return out;
}

}  // namespace genmeter
