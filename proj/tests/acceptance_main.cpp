// Seven go/no-go checks for the full engine, each printed as one
// [PASS]/[FAIL] line with its runtime. Exit status is the failure count.
//
// Usage: genmeter_acceptance <cli-binary> <sweep-config.ini> <work-dir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <Eigen/Dense>

#include "genmeter/genmeter.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace genmeter;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome ok(const std::string& detail) { return {true, detail}; }
Outcome fail(const std::string& detail) { return {false, detail}; }

std::string fmt_seconds(double s) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << s << "s";
    return os.str();
}

std::string fmt_sci(double v) {
    std::ostringstream os;
    os.setf(std::ios::scientific);
    os.precision(1);
    os << v;
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error("cannot read " + p.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// ---- criterion 1: analytic gradients vs central finite differences ------

Outcome check_gradients() {
    Rng rng(20260823);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        ModelSpec spec;
        spec.input_dim = 2 + rng.index(3);
        std::size_t layers = 1 + rng.index(2);
        for (std::size_t l = 0; l < layers; ++l) spec.hidden_widths.push_back(2 + rng.index(3));
        spec.num_classes = 2 + static_cast<int>(rng.index(2));
        Mlp mlp(spec);
        ParamVector p = mlp.init_params(derive_seed(7, "acc_grad_" + std::to_string(trial)));
        LabeledBatch batch = testutil::smooth_batch(mlp, p, rng, 6, spec.num_classes);

        std::vector<double> analytic = mlp.grad(p, batch, Mode::kEval).grads.flatten();
        auto loss = [&](const std::vector<double>& flat) {
            return mlp.forward_loss(p.with_flat(flat), batch, Mode::kEval).mean_loss;
        };
        std::vector<double> fd = testutil::fd_gradient(loss, p.flatten());
        worst = std::max(worst, testutil::max_rel_err(analytic, fd));
    }
    if (worst >= 1e-5) return fail("max rel err " + fmt_sci(worst) + " >= 1e-5");
    return ok("20 random models, max rel err " + fmt_sci(worst));
}

// ---- criterion 2: power iteration and Hutchinson on known quadratics ----

Outcome check_curvature() {
    // L = 0.5 theta^T diag(3,1) theta: dominant eigenvalue 3, trace 4.
    std::vector<double> theta = {0.7, -0.4};
    HvpFn diag31 = make_hvp(testutil::quadratic_grad({3.0, 1.0}), theta);
    PowerIterResult top = power_iteration(diag31, 2, 200, 1e-9, 11);
    if (!top.converged || std::fabs(top.value - 3.0) > 1e-3)
        return fail("diag(3,1) top eigenvalue " + fmt_sci(top.value) + " not within 1e-3 of 3");

    // Dominant-in-magnitude, negative: diag(-2,1) must report -2.
    HvpFn neg = make_hvp(testutil::quadratic_grad({-2.0, 1.0}), theta);
    PowerIterResult negtop = power_iteration(neg, 2, 200, 1e-9, 12);
    if (!negtop.converged || std::fabs(negtop.value + 2.0) > 1e-3)
        return fail("diag(-2,1) estimate " + fmt_sci(negtop.value) + " not within 1e-3 of -2");

    // Rotated spectrum {5,2}: A = R diag(5,2) R^T with R = rotation(0.3).
    const double c = std::cos(0.3), s = std::sin(0.3);
    const double a00 = 5 * c * c + 2 * s * s;
    const double a01 = 3 * c * s;
    const double a11 = 5 * s * s + 2 * c * c;
    GradFn rot_grad = [=](const std::vector<double>& t) {
        return std::vector<double>{a00 * t[0] + a01 * t[1], a01 * t[0] + a11 * t[1]};
    };
    PowerIterResult rot = power_iteration(make_hvp(rot_grad, {0.3, -0.8}), 2, 200, 1e-9, 13);
    if (!rot.converged || std::fabs(rot.value - 5.0) > 1e-3)
        return fail("rotated spectrum estimate " + fmt_sci(rot.value) + " not within 1e-3 of 5");

    double tr = hutchinson_trace(diag31, 2, 200, 21);
    if (std::fabs(tr - 4.0) > 0.15)
        return fail("Hutchinson trace " + fmt_sci(tr) + " not within 0.15 of 4");

    // Off-diagonal coupling gives the estimator real variance (single draws
    // are exactly 3 or 5 here); 2000 draws keep the mean well inside 0.15.
    GradFn coupled = [](const std::vector<double>& t) {
        return std::vector<double>{3 * t[0] + 0.5 * t[1], 0.5 * t[0] + t[1]};
    };
    double tr2 = hutchinson_trace(make_hvp(coupled, theta), 2, 2000, 22);
    if (std::fabs(tr2 - 4.0) > 0.15)
        return fail("coupled trace " + fmt_sci(tr2) + " not within 0.15 of 4");

    return ok("top eigenvalue within 1e-3 (incl. negative and rotated), trace within 0.15");
}

// ---- criterion 3: measure formulas vs closed-form oracles ---------------

Outcome check_measure_formulas() {
    // Capacity and norm measures recomputed on a real trained model.
    DatasetSpec dspec;
    dspec.n_per_split = 64;
    dspec.num_classes = 2;
    dspec.noise = 0.3;
    dspec.generator_seed = 7;
    DatasetBundle data = make_dataset(dspec);
    ModelSpec mspec;
    mspec.input_dim = 2;
    mspec.hidden_widths = {4};
    mspec.num_classes = 2;
    TrainConfig tcfg;
    tcfg.learning_rate = 0.1;
    tcfg.batch_size = 16;
    tcfg.epochs = 3;
    tcfg.seed = 5;
    RunRecord rec = train_run(data, mspec, tcfg);
    if (rec.failed) return fail("oracle training run failed: " + rec.failure_reason);

    MeasureFilter filter;
    filter.tokens = {"params", "vcdim", "magnitude"};
    std::map<std::string, double> got;
    for (const auto& v : compute_measures(rec, data, MeasureSettings{}, filter)) {
        if (!v.ok) return fail(v.name + " unexpectedly failed");
        got[v.name] = v.value;
    }
    const double w = 22.0;  // (2*4+4) + (4*2+2) parameters
    if (got.at("params") != w) return fail("params != hand-counted 22");
    if (std::fabs(got.at("vcdim") - w * std::log(w)) > 1e-12)
        return fail("vcdim != W ln W");
    double norm_sq = 0.0;
    for (double x : rec.final_params.flatten()) norm_sq += x * x;
    if (std::fabs(got.at("magnitude") - std::sqrt(norm_sq)) > 1e-12 * std::sqrt(norm_sq))
        return fail("magnitude != parameter l2 norm");

    // Information-criterion bias terms.
    if (aic_bias(10) != 20.0) return fail("aic_bias(10) != 20");
    auto aicc = aicc_bias(3, 10);  // 6 + 24/6
    if (!aicc || *aicc != 10.0) return fail("aicc_bias(3,10) != 10");
    if (aicc_bias(3, 4)) return fail("aicc_bias defined at n <= k+1");
    if (tic_bias_from_diags({2.0, 2.0}, {2.0, 2.0}, 0.0) != 2.0)
        return fail("well-specified tic bias != parameter count");

    // Scalar Gaussian KL cases.
    if (kl_gaussian_scalar(0.0, 1.0, 1.0) != 0.0) return fail("KL(q=p) != 0");
    if (kl_gaussian_scalar(1.0, 1.0, 1.0) != 0.5) return fail("KL mean-shift case != 0.5");

    // Path norm vs explicit path enumeration on a 2-2-2 chain.
    ModelSpec tiny;
    tiny.input_dim = 2;
    tiny.hidden_widths = {2};
    tiny.num_classes = 2;
    ParamVector pv = Mlp(tiny).init_params(3);
    const Tensor& w1 = pv.segment(0).tensor;
    const Tensor& b1 = pv.segment(1).tensor;
    const Tensor& w2 = pv.segment(2).tensor;
    const Tensor& b2 = pv.segment(3).tensor;
    double enumerated = 0.0;
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t i = 0; i < 2; ++i)
                enumerated += w1.at(i, h) * w1.at(i, h) * w2.at(h, o) * w2.at(h, o);
            enumerated += b1.v[h] * b1.v[h] * w2.at(h, o) * w2.at(h, o);
        }
        enumerated += b2.v[o] * b2.v[o];
    }
    double pn = path_norm(pv, 2);
    if (std::fabs(pn - enumerated) > 1e-12 * std::max(1.0, enumerated))
        return fail("path norm != path enumeration");

    // Spectral norm estimate vs dense SVD on a random 6x8 matrix.
    Tensor m({6, 8});
    Rng mrng(41);
    for (double& x : m.v) x = mrng.normal();
    Eigen::MatrixXd em(6, 8);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 8; ++j) em(i, j) = m.at(i, j);
    double exact = Eigen::JacobiSVD<Eigen::MatrixXd>(em).singularValues()(0);
    SpectralEstimate est = spectral_norm_estimate(m, 500, 1e-10, 9);
    if (!est.converged || std::fabs(est.value - exact) > 1e-6)
        return fail("spectral norm " + fmt_sci(est.value) + " vs svd " + fmt_sci(exact));

    // Two-bin calibration arithmetic: gaps 0.1 and 0.3 at equal mass.
    const double z55 = std::log(11.0 / 9.0);  // softmax confidence 0.55
    const double z75 = std::log(3.0);         // softmax confidence 0.75
    Tensor logits({40, 2});
    std::vector<int> labels(40);
    for (int n = 0; n < 40; ++n) {
        const bool low_bin = n < 20;
        logits.at(n, 0) = low_bin ? z55 : z75;
        logits.at(n, 1) = 0.0;
        labels[n] = (n % 20) < 9 ? 0 : 1;  // accuracy 9/20 = 0.45 in each bin
    }
    PredictionArchive arch = prediction_archive(logits, labels);
    double ece = expected_calibration_error(arch, 5);
    double mce = max_calibration_error(arch, 5);
    double rel = reliability_gap(arch, 5);
    if (std::fabs(ece - 0.2) > 1e-9 || std::fabs(mce - 0.3) > 1e-9 ||
        std::fabs(rel - 0.2) > 1e-9)
        return fail("two-bin calibration: ece " + fmt_sci(ece) + " mce " + fmt_sci(mce) +
                    " rel " + fmt_sci(rel));

    return ok("capacity, information, KL, path, spectral and calibration formulas verified");
}

// ---- criterion 4: rank / sign / information statistics ------------------

double kendall_naive(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long long num = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = (x[i] < x[j]) ? -1.0 : (x[i] > x[j]) ? 1.0 : 0.0;
            const double b = (y[i] < y[j]) ? -1.0 : (y[i] > y[j]) ? 1.0 : 0.0;
            num += static_cast<long long>(a * b);
        }
    return static_cast<double>(num) / (static_cast<double>(n) * (n - 1) / 2.0);
}

Outcome check_statistics() {
    Rng rng(424242);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(39);
        std::vector<double> x(n), y(n);
        const bool coarse = trial % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = coarse ? static_cast<double>(rng.index(5)) : rng.normal();
            y[i] = coarse ? static_cast<double>(rng.index(5)) : rng.normal();
        }
        if (std::fabs(kendall_tau(x, y) - kendall_naive(x, y)) > 1e-12)
            return fail("kendall mismatch with brute force at trial " + std::to_string(trial));
    }

    // Sign-error antisymmetry on tie-free data, and n_eff = pair count.
    const std::vector<std::string> axes = {"lr", "wd", "seed"};
    std::vector<RunPoint> pts, flipped;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 4; ++k) {
                RunPoint p;
                p.tokens = {"l" + std::to_string(i), "w" + std::to_string(j),
                            "s" + std::to_string(k)};
                p.mu = rng.normal();
                p.g = rng.normal();
                pts.push_back(p);
                p.mu = -p.mu;
                flipped.push_back(p);
            }
    auto envs = sign_error_environments(axes, pts);
    auto envs_neg = sign_error_environments(axes, flipped);
    if (envs.empty() || envs.size() != envs_neg.size())
        return fail("environment counts differ under sign flip");
    for (std::size_t e = 0; e < envs.size(); ++e) {
        if (std::fabs(envs[e].sign_error + envs_neg[e].sign_error - 1.0) > 1e-12)
            return fail("sign-error antisymmetry violated");
        if (envs[e].n_eff != static_cast<double>(envs[e].pairs))
            return fail("n_eff != pair count under unit weights");
    }

    // Plug-in information ratio at 1e4 sampled pairs.
    const std::size_t n_pts = 500;
    std::vector<RunPoint> ident(n_pts), indep(n_pts);
    for (std::size_t i = 0; i < n_pts; ++i) {
        const double g = rng.normal();
        ident[i].tokens = {std::to_string(i)};
        ident[i].g = g;
        ident[i].mu = g;
        indep[i].tokens = ident[i].tokens;
        indep[i].g = g;
        indep[i].mu = rng.normal();
    }
    auto pairs = sign_pairs(n_pts, 10000, 77);
    if (pairs.size() != 10000) return fail("pair subsample size != 1e4");
    NcmiResult same = normalized_cmi({"id"}, ident, pairs, {});
    if (same.degenerate || std::fabs(same.value - 1.0) > 1e-9)
        return fail("identical series ratio " + fmt_sci(same.value) + " != 1");
    NcmiResult noise = normalized_cmi({"id"}, indep, pairs, {});
    if (noise.degenerate || noise.value > 0.05)
        return fail("independent series ratio " + fmt_sci(noise.value) + " > 0.05");

    return ok("kendall x200, antisymmetry, n_eff and information ratios verified");
}

// ---- criterion 5: planted predictor through the real store + stats ------

Outcome check_planted(const fs::path& work) {
    HyperGrid grid;
    grid.axes.push_back({"lr", {}});
    grid.axes.push_back({"weight_decay", {}});
    grid.axes.push_back({"seed", {}});
    for (int i = 0; i < 4; ++i) grid.axes[0].tokens.push_back("lr" + std::to_string(i));
    for (int j = 0; j < 5; ++j) grid.axes[1].tokens.push_back("wd" + std::to_string(j));
    for (int k = 0; k < 25; ++k) grid.axes[2].tokens.push_back(std::to_string(k));

    const fs::path store_path = work / "planted.jsonl";
    fs::remove(store_path);
    Store store = Store::create(store_path.string(), grid, "planted fixture");

    ModelSpec mspec;
    mspec.input_dim = 2;
    mspec.hidden_widths = {2};
    mspec.num_classes = 2;
    ParamVector pv = Mlp(mspec).init_params(0);
    Rng noise_rng(derive_seed(99, "planted_noise"));

    for (const auto& a : expand_grid(grid)) {
        const int i = a[0].second[2] - '0';
        const int j = a[1].second[2] - '0';
        const int k = std::stoi(a[2].second);
        const double g = (i + 0.1 * j + 0.001 * k) / 4.0;
        RunRecord rec;
        for (const auto& [axis, tok] : a) rec.assignment[axis] = tok;
        rec.run_id = run_id_for(a);
        rec.model = mspec;
        rec.init_params = pv;
        rec.final_params = pv;
        rec.train_acc = 0.9;
        rec.test_acc_iid = 0.9 - g;
        store.add_run(rec);
        std::vector<MeasureValue> vals;
        vals.push_back(MeasureValue::success("params", MeasureCategory::kBaselineOutput, g, 0));
        vals.push_back(MeasureValue::success("magnitude", MeasureCategory::kBaselineOutput,
                                             noise_rng.normal(), 0));
        store.set_measures(rec.run_id, vals);
    }
    if (store.runs().size() != 500) return fail("planted store does not hold 500 runs");

    StatsSettings settings;
    settings.targets = {"iid"};
    settings.seed = 123;
    StatsReport rep = compute_stats_report(Store::open(store_path.string()), settings);
    const MeasureStats* tracker = nullptr;
    const MeasureStats* random = nullptr;
    for (const auto& e : rep.entries) {
        if (e.measure == "params") tracker = &e;
        if (e.measure == "magnitude") random = &e;
    }
    if (!tracker || !random) return fail("planted measures missing from report");
    if (tracker->points != 500 || random->points != 500)
        return fail("planted report does not cover all 500 runs");

    if (std::fabs(tracker->psi.psi - 1.0) > 1e-12)
        return fail("gap-valued measure psi " + fmt_sci(tracker->psi.psi) + " != 1");
    if (tracker->sign.n_env == 0 || tracker->sign.max != 0.0)
        return fail("gap-valued measure has sign errors (max " + fmt_sci(tracker->sign.max) +
                    ")");
    if (!tracker->cmi.ok || std::fabs(tracker->cmi.value - 1.0) > 1e-9)
        return fail("gap-valued measure information ratio " + fmt_sci(tracker->cmi.value) +
                    " != 1");

    if (std::fabs(random->psi.psi) > 0.1)
        return fail("noise measure |psi| " + fmt_sci(std::fabs(random->psi.psi)) + " > 0.1");
    if (!(random->sign.mean >= 0.4 && random->sign.mean <= 0.6))
        return fail("noise measure mean sign error " + fmt_sci(random->sign.mean) +
                    " outside [0.4, 0.6]");
    if (!random->cmi.ok || random->cmi.value > 0.05)
        return fail("noise measure information ratio " + fmt_sci(random->cmi.value) + " > 0.05");

    return ok("500-run planted store: tracker psi 1 / max SE 0 / ratio 1, noise inert");
}

// ---- criteria 6 and 7: the shipped sweep through the CLI ----------------

int run_cli(const std::string& cli, const std::vector<std::string>& args, const fs::path& log) {
    std::string cmd = "'" + cli + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >>'" + log.string() + "' 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome run_toy_pipeline(const std::string& cli, const std::string& config,
                         const fs::path& store, const fs::path& report, const fs::path& log) {
    if (run_cli(cli, {"sweep", "run", config, "--store", store.string(), "--jobs", "4"}, log))
        return fail("sweep stage exited nonzero (see " + log.string() + ")");
    if (run_cli(cli, {"measure", "compute", store.string(), "--jobs", "4"}, log))
        return fail("measure stage exited nonzero (see " + log.string() + ")");
    if (run_cli(cli, {"stats", store.string(), "--out", report.string()}, log))
        return fail("stats stage exited nonzero (see " + log.string() + ")");
    if (run_cli(cli, {"plot", report.string()}, log))
        return fail("plot stage exited nonzero (see " + log.string() + ")");
    return ok("");
}

Outcome check_toy_sweep(const std::string& cli, const std::string& config, const fs::path& work) {
    const fs::path store = work / "toy.jsonl";
    const fs::path report = work / "report";
    Outcome ran = run_toy_pipeline(cli, config, store, report, work / "toy_cli.log");
    if (!ran.pass) return ran;

    Store st = Store::open(store.string());
    if (st.runs().size() < 240)
        return fail("only " + std::to_string(st.runs().size()) + " runs, need >= 240");
    std::set<std::string> catalog_names;
    for (const auto& e : measure_catalog()) catalog_names.insert(e.name);
    std::size_t ok_count = 0, failed_count = 0;
    for (const auto& [id, rec] : st.runs()) {
        std::set<std::string> names;
        for (const auto& [name, v] : rec.measures) {
            names.insert(name);
            (v.ok ? ok_count : failed_count) += 1;
        }
        if (names != catalog_names)
            return fail("run " + id + " is missing catalog measures (" +
                        std::to_string(names.size()) + " of " +
                        std::to_string(catalog_names.size()) + ")");
    }

    SweepConfig cfg = load_sweep_config(config);
    std::set<std::string> categories;
    for (const auto& e : measure_catalog()) categories.insert(to_string(e.category));
    for (const auto& cat : categories) {
        const fs::path f = report / ("scatter_" + cat + ".svg");
        if (!fs::exists(f) || slurp(f).rfind("<svg", 0) != 0)
            return fail("missing category scatter " + f.string());
    }
    for (const auto& target : cfg.stats.targets) {
        const fs::path f = report / ("sign_error_" + sanitize_target(target) + ".svg");
        if (!fs::exists(f) || slurp(f).rfind("<svg", 0) != 0)
            return fail("missing sign-error panel " + f.string());
    }
    return ok(std::to_string(st.runs().size()) + " runs, " + std::to_string(ok_count) +
              " values ok / " + std::to_string(failed_count) + " explicitly failed, " +
              std::to_string(categories.size()) + " scatters + " +
              std::to_string(cfg.stats.targets.size()) + " panels");
}

Outcome check_determinism(const std::string& cli, const std::string& config,
                          const fs::path& work) {
    const fs::path report1 = work / "report";
    if (!fs::exists(report1)) return fail("first pipeline output missing; prior criterion failed");
    Outcome ran = run_toy_pipeline(cli, config, work / "toy_rerun.jsonl", work / "report_rerun",
                                   work / "rerun_cli.log");
    if (!ran.pass) return ran;

    auto names = [](const fs::path& dir) {
        std::set<std::string> out;
        for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
        return out;
    };
    const fs::path report2 = work / "report_rerun";
    if (names(report1) != names(report2)) return fail("artifact file sets differ across reruns");
    std::size_t checked = 0;
    for (const auto& name : names(report1)) {
        if (slurp(report1 / name) != slurp(report2 / name))
            return fail("artifact differs across reruns: " + name);
        ++checked;
    }
    return ok(std::to_string(checked) + " artifacts byte-identical across a fresh rerun");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: genmeter_acceptance <cli-binary> <sweep-config.ini> <work-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const std::string config = argv[2];
    const fs::path work = argv[3];
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    struct Criterion {
        const char* name;
        double budget_s;  // 0 = untimed
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"gradients match finite differences", 30, check_gradients},
        {"curvature estimators hit known spectra", 60, check_curvature},
        {"measure formulas match closed-form oracles", 60, check_measure_formulas},
        {"rank/sign/information statistics match brute force", 120, check_statistics},
        {"planted predictor recovered end to end", 300, [&] { return check_planted(work); }},
        {"toy sweep completes with full catalog coverage", 600,
         [&] { return check_toy_sweep(cli, config, work); }},
        {"analysis artifacts reproduce byte-identically", 0,
         [&] { return check_determinism(cli, config, work); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && c.budget_s > 0 && dt >= c.budget_s) {
            o.pass = false;
            o.detail += (o.detail.empty() ? "" : "; ") + std::string("exceeded ") +
                        fmt_seconds(c.budget_s) + " budget";
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << (i + 1) << "/7 " << c.name
                  << (o.detail.empty() ? "" : ": " + o.detail) << " (" << fmt_seconds(dt)
                  << ")\n";
    }
    return failures;
}
