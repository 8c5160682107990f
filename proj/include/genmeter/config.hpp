#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "genmeter/data.hpp"
#include "genmeter/errors.hpp"
#include "genmeter/measures/settings.hpp"
#include "genmeter/model.hpp"
#include "genmeter/stats.hpp"
#include "genmeter/store.hpp"
#include "genmeter/train.hpp"

namespace genmeter {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double_token(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    if (t.empty()) throw ConfigError(what + ": empty number");
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw ConfigError(what + ": bad number '" + s + "'");
    require_finite(v, what.c_str());
    return v;
}

inline long long parse_int_token(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        throw ConfigError(what + ": bad integer '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64_token(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
        throw ConfigError(what + ": bad unsigned integer '" + s + "'");
    return v;
}

}  // namespace detail

// Minimal INI structure preserving declaration order within each section.
struct IniFile {
    using Section = std::vector<std::pair<std::string, std::string>>;
    std::vector<std::pair<std::string, Section>> sections;

    const Section* find(const std::string& name) const {
        for (const auto& [n, s] : sections)
            if (n == name) return &s;
        return nullptr;
    }
};

// Sections in brackets, key = value lines, full-line comments with '#' or
// ';'. Duplicate sections or keys are rejected.
inline IniFile parse_ini(const std::string& text) {
    IniFile ini;
    IniFile::Section* current = nullptr;
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section");
            std::string name = detail::trim(line.substr(1, line.size() - 2));
            if (name.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section");
            if (ini.find(name))
                throw ConfigError("config: duplicate section [" + name + "]");
            ini.sections.emplace_back(name, IniFile::Section{});
            current = &ini.sections.back().second;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        if (!current)
            throw ConfigError("config line " + std::to_string(line_no) + ": key outside section");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        for (const auto& [k, v] : *current)
            if (k == key) throw ConfigError("config: duplicate key " + key);
        current->emplace_back(key, value);
    }
    return ini;
}

// Settings for the predictivity statistics stage.
struct StatsSettings {
    std::vector<std::string> targets = {"iid"};
    std::size_t pair_cap = 50000;
    int cmi_depth = 2;
    double n_eff_min = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (targets.empty()) throw ConfigError("stats: no targets");
        for (const auto& t : targets) parse_gap_target(t);
        if (pair_cap == 0) throw ConfigError("stats: pair_cap must be positive");
        if (cmi_depth < 0) throw ConfigError("stats: cmi_depth must be >= 0");
        if (n_eff_min < 0) throw ConfigError("stats: n_eff_min must be >= 0");
    }
};

// Axis names the sweep layer knows how to map onto a run configuration.
inline const std::set<std::string>& known_axes() {
    static const std::set<std::string> names = {"lr",      "batch_size", "weight_decay",
                                               "optimizer", "dropout",    "width",
                                               "depth",     "seed",       "epochs"};
    return names;
}

// A full sweep description: dataset, model and train templates, the
// hyperparameter grid, measure settings, and statistics settings.
struct SweepConfig {
    DatasetSpec dataset;
    ModelSpec model;    // template; grid axes override fields per run
    TrainConfig train;  // template
    HyperGrid grid;
    MeasureSettings measures;
    std::vector<std::string> measure_only;  // empty selects the whole catalog
    StatsSettings stats;
    std::string raw_text;  // original file text, archived in the store manifest

    void validate() const {
        model.validate();
        measures.validate();
        stats.validate();
        grid.validate();
        if (train.learning_rate <= 0) throw ConfigError("train: lr must be positive");
        if (train.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (train.epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (train.weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
        if (dataset.num_classes < 2) throw ConfigError("dataset: need at least 2 classes");
        for (const auto& ax : grid.axes) {
            if (!known_axes().count(ax.name))
                throw ConfigError("grid: unknown axis " + ax.name);
            for (const auto& tok : ax.tokens) check_axis_token(ax.name, tok);
        }
        // Exercise the per-run mapping once so depth/width interplay errors
        // surface at load time rather than mid-sweep.
        auto assignments = expand_grid(grid);
        (void)model_for(assignments.front());
        (void)train_for(assignments.front(), 0);
    }

    static void check_axis_token(const std::string& axis, const std::string& tok) {
        const std::string what = "grid axis " + axis;
        if (axis == "lr") {
            if (detail::parse_double_token(tok, what) <= 0)
                throw ConfigError(what + ": lr must be positive");
        } else if (axis == "weight_decay") {
            if (detail::parse_double_token(tok, what) < 0)
                throw ConfigError(what + ": weight_decay must be >= 0");
        } else if (axis == "dropout") {
            double p = detail::parse_double_token(tok, what);
            if (p < 0 || p >= 1) throw ConfigError(what + ": dropout must be in [0, 1)");
        } else if (axis == "batch_size" || axis == "width" || axis == "depth" ||
                   axis == "epochs") {
            if (detail::parse_int_token(tok, what) < 1)
                throw ConfigError(what + ": must be >= 1");
        } else if (axis == "optimizer") {
            (void)parse_optimizer(tok);
        } else if (axis == "seed") {
            (void)detail::parse_u64_token(tok, what);
        }
    }

    // Model spec for one grid assignment. A width axis resizes every hidden
    // layer; a depth axis sets the number of hidden layers, taking the width
    // from the width axis or from the template's first hidden layer.
    ModelSpec model_for(const Assignment& assignment) const {
        ModelSpec m = model;
        m.input_dim = dataset.input_dim;
        m.num_classes = dataset.num_classes;
        const std::string* width_tok = nullptr;
        const std::string* depth_tok = nullptr;
        for (const auto& [axis, tok] : assignment) {
            if (axis == "dropout")
                m.dropout_p = detail::parse_double_token(tok, "dropout axis");
            else if (axis == "width")
                width_tok = &tok;
            else if (axis == "depth")
                depth_tok = &tok;
        }
        if (width_tok) {
            auto w = static_cast<std::size_t>(detail::parse_int_token(*width_tok, "width axis"));
            if (m.hidden_widths.empty()) m.hidden_widths.push_back(w);
            for (auto& h : m.hidden_widths) h = w;
        }
        if (depth_tok) {
            auto d = static_cast<std::size_t>(detail::parse_int_token(*depth_tok, "depth axis"));
            std::size_t w;
            if (width_tok)
                w = static_cast<std::size_t>(detail::parse_int_token(*width_tok, "width axis"));
            else if (!m.hidden_widths.empty())
                w = m.hidden_widths.front();
            else
                throw ConfigError("depth axis needs a width axis or a model hidden template");
            m.hidden_widths.assign(d, w);
        }
        m.validate();
        return m;
    }

    // Train config for one grid assignment. The seed offset shifts every
    // seed token, giving disjoint replications without editing the config.
    TrainConfig train_for(const Assignment& assignment, std::uint64_t seed_offset) const {
        TrainConfig t = train;
        t.seed += seed_offset;
        for (const auto& [axis, tok] : assignment) {
            if (axis == "lr")
                t.learning_rate = detail::parse_double_token(tok, "lr axis");
            else if (axis == "batch_size")
                t.batch_size =
                    static_cast<std::size_t>(detail::parse_int_token(tok, "batch_size axis"));
            else if (axis == "weight_decay")
                t.weight_decay = detail::parse_double_token(tok, "weight_decay axis");
            else if (axis == "optimizer")
                t.optimizer = parse_optimizer(tok);
            else if (axis == "epochs")
                t.epochs = static_cast<int>(detail::parse_int_token(tok, "epochs axis"));
            else if (axis == "seed")
                t.seed = detail::parse_u64_token(tok, "seed axis") + seed_offset;
        }
        if (t.learning_rate <= 0) throw ConfigError("train: lr must be positive");
        return t;
    }
};

namespace detail {

template <typename Fn>
void for_each_key(const IniFile& ini, const std::string& section, const Fn& fn) {
    const IniFile::Section* s = ini.find(section);
    if (!s) return;
    for (const auto& [k, v] : *s) fn(k, v);
}

inline AggKind parse_agg_key(const std::string& v, const std::string& what) {
    try {
        return parse_agg(v);
    } catch (const ConfigError&) {
        throw ConfigError(what + ": unknown aggregation '" + v + "'");
    }
}

}  // namespace detail

inline SweepConfig parse_sweep_config(const std::string& text) {
    IniFile ini = parse_ini(text);
    static const std::set<std::string> sections = {"dataset", "model", "train",
                                                   "grid.axes", "measures", "stats"};
    for (const auto& [name, kv] : ini.sections) {
        (void)kv;
        if (!sections.count(name)) throw ConfigError("config: unknown section [" + name + "]");
    }

    SweepConfig cfg;
    cfg.raw_text = text;

    detail::for_each_key(ini, "dataset", [&](const std::string& k, const std::string& v) {
        if (k == "kind")
            cfg.dataset.kind = parse_data_kind(v);
        else if (k == "classes")
            cfg.dataset.num_classes = static_cast<int>(detail::parse_int_token(v, "dataset.classes"));
        else if (k == "input_dim")
            cfg.dataset.input_dim =
                static_cast<std::size_t>(detail::parse_int_token(v, "dataset.input_dim"));
        else if (k == "noise")
            cfg.dataset.noise = detail::parse_double_token(v, "dataset.noise");
        else if (k == "n_per_split")
            cfg.dataset.n_per_split =
                static_cast<std::size_t>(detail::parse_int_token(v, "dataset.n_per_split"));
        else if (k == "shift")
            cfg.dataset.shift = parse_shift_kind(v);
        else if (k == "generator_seed")
            cfg.dataset.generator_seed = detail::parse_u64_token(v, "dataset.generator_seed");
        else
            throw ConfigError("config: unknown key dataset." + k);
    });

    detail::for_each_key(ini, "model", [&](const std::string& k, const std::string& v) {
        if (k == "hidden") {
            cfg.model.hidden_widths.clear();
            for (const auto& tok : detail::split_list(v))
                cfg.model.hidden_widths.push_back(
                    static_cast<std::size_t>(detail::parse_int_token(tok, "model.hidden")));
        } else if (k == "dropout") {
            cfg.model.dropout_p = detail::parse_double_token(v, "model.dropout");
        } else if (k == "init") {
            cfg.model.init = parse_init_scheme(v);
        } else {
            throw ConfigError("config: unknown key model." + k);
        }
    });

    detail::for_each_key(ini, "train", [&](const std::string& k, const std::string& v) {
        if (k == "optimizer")
            cfg.train.optimizer = parse_optimizer(v);
        else if (k == "lr")
            cfg.train.learning_rate = detail::parse_double_token(v, "train.lr");
        else if (k == "batch_size")
            cfg.train.batch_size =
                static_cast<std::size_t>(detail::parse_int_token(v, "train.batch_size"));
        else if (k == "weight_decay")
            cfg.train.weight_decay = detail::parse_double_token(v, "train.weight_decay");
        else if (k == "epochs")
            cfg.train.epochs = static_cast<int>(detail::parse_int_token(v, "train.epochs"));
        else if (k == "seed")
            cfg.train.seed = detail::parse_u64_token(v, "train.seed");
        else
            throw ConfigError("config: unknown key train." + k);
    });

    detail::for_each_key(ini, "grid.axes", [&](const std::string& k, const std::string& v) {
        HyperAxis ax;
        ax.name = k;
        ax.tokens = detail::split_list(v);
        cfg.grid.axes.push_back(std::move(ax));
    });

    detail::for_each_key(ini, "measures", [&](const std::string& k, const std::string& v) {
        MeasureSettings& m = cfg.measures;
        if (k == "only")
            cfg.measure_only = detail::split_list(v);
        else if (k == "sam_rho")
            m.sam_rho = detail::parse_double_token(v, "measures.sam_rho");
        else if (k == "noise_r")
            m.noise_r = detail::parse_double_token(v, "measures.noise_r");
        else if (k == "noise_samples")
            m.noise_samples = static_cast<int>(detail::parse_int_token(v, "measures.noise_samples"));
        else if (k == "noise_agg")
            m.noise_agg = detail::parse_agg_key(v, "measures.noise_agg");
        else if (k == "hutchinson_samples")
            m.hutchinson_samples =
                static_cast<int>(detail::parse_int_token(v, "measures.hutchinson_samples"));
        else if (k == "power_iters")
            m.power_iters = static_cast<int>(detail::parse_int_token(v, "measures.power_iters"));
        else if (k == "power_tol")
            m.power_tol = detail::parse_double_token(v, "measures.power_tol");
        else if (k == "exact_diag_limit")
            m.exact_diag_limit =
                static_cast<std::size_t>(detail::parse_int_token(v, "measures.exact_diag_limit"));
        else if (k == "flatness_lambda")
            m.flatness_lambda = detail::parse_double_token(v, "measures.flatness_lambda");
        else if (k == "flatness_agg")
            m.flatness_agg = detail::parse_agg_key(v, "measures.flatness_agg");
        else if (k == "eval_batches")
            m.eval_batches = static_cast<int>(detail::parse_int_token(v, "measures.eval_batches"));
        else if (k == "eval_batch_size")
            m.eval_batch_size =
                static_cast<std::size_t>(detail::parse_int_token(v, "measures.eval_batch_size"));
        else if (k == "gradient_norm_agg")
            m.gradient_norm_agg = detail::parse_agg_key(v, "measures.gradient_norm_agg");
        else if (k == "posterior_samples")
            m.posterior_samples =
                static_cast<int>(detail::parse_int_token(v, "measures.posterior_samples"));
        else if (k == "sigma_post")
            m.sigma_post = detail::parse_double_token(v, "measures.sigma_post");
        else if (k == "sigma_prior")
            m.sigma_prior = detail::parse_double_token(v, "measures.sigma_prior");
        else if (k == "delta")
            m.delta = detail::parse_double_token(v, "measures.delta");
        else if (k == "calibration_bins")
            m.calibration_bins =
                static_cast<int>(detail::parse_int_token(v, "measures.calibration_bins"));
        else
            throw ConfigError("config: unknown key measures." + k);
    });

    detail::for_each_key(ini, "stats", [&](const std::string& k, const std::string& v) {
        if (k == "targets")
            cfg.stats.targets = detail::split_list(v);
        else if (k == "pair_cap")
            cfg.stats.pair_cap =
                static_cast<std::size_t>(detail::parse_int_token(v, "stats.pair_cap"));
        else if (k == "cmi_depth")
            cfg.stats.cmi_depth = static_cast<int>(detail::parse_int_token(v, "stats.cmi_depth"));
        else if (k == "n_eff_min")
            cfg.stats.n_eff_min = detail::parse_double_token(v, "stats.n_eff_min");
        else if (k == "seed")
            cfg.stats.seed = detail::parse_u64_token(v, "stats.seed");
        else
            throw ConfigError("config: unknown key stats." + k);
    });

    if (cfg.grid.axes.empty()) throw ConfigError("config: [grid.axes] is required");
    for (const auto& tok : cfg.measure_only) {
        MeasureCategory cat;
        if (!is_measure_name(tok) && !parse_category(tok, cat))
            throw ConfigError("measures.only: unknown measure or category '" + tok + "'");
    }
    cfg.validate();
    return cfg;
}

inline SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_sweep_config(text);
}

}  // namespace genmeter
