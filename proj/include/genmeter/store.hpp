#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "genmeter/errors.hpp"
#include "genmeter/train.hpp"

namespace genmeter {

namespace detail {

// FIPS 180-4 SHA-256, used only to derive stable run identifiers.
class Sha256 {
  public:
    void update(const unsigned char* data, std::size_t len) {
        total_bits_ += static_cast<std::uint64_t>(len) * 8;
        while (len > 0) {
            std::size_t take = std::min(len, std::size_t{64} - fill_);
            std::copy(data, data + take, block_.begin() + static_cast<long>(fill_));
            fill_ += take;
            data += take;
            len -= take;
            if (fill_ == 64) {
                process();
                fill_ = 0;
            }
        }
    }

    std::array<std::uint8_t, 32> finish() {
        std::uint64_t bits = total_bits_;
        std::uint8_t pad = 0x80;
        update(&pad, 1);
        std::uint8_t zero = 0;
        while (fill_ != 56) update(&zero, 1);
        for (int i = 7; i >= 0; --i) {
            std::uint8_t b = static_cast<std::uint8_t>(bits >> (8 * i));
            update(&b, 1);
        }
        std::array<std::uint8_t, 32> out{};
        for (int i = 0; i < 8; ++i) {
            out[4 * i + 0] = static_cast<std::uint8_t>(h_[i] >> 24);
            out[4 * i + 1] = static_cast<std::uint8_t>(h_[i] >> 16);
            out[4 * i + 2] = static_cast<std::uint8_t>(h_[i] >> 8);
            out[4 * i + 3] = static_cast<std::uint8_t>(h_[i]);
        }
        return out;
    }

  private:
    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process() {
        static constexpr std::array<std::uint32_t, 64> k = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::array<std::uint32_t, 64> w{};
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(block_[4 * i]) << 24) | (std::uint32_t(block_[4 * i + 1]) << 16) |
                   (std::uint32_t(block_[4 * i + 2]) << 8) | std::uint32_t(block_[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3];
        std::uint32_t e = h_[4], f = h_[5], g = h_[6], h = h_[7];
        for (int i = 0; i < 64; ++i) {
            std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            std::uint32_t ch = (e & f) ^ (~e & g);
            std::uint32_t t1 = h + s1 + ch + k[i] + w[i];
            std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t t2 = s0 + maj;
            h = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
        h_[5] += f;
        h_[6] += g;
        h_[7] += h;
    }

    std::array<std::uint32_t, 8> h_ = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                       0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::array<std::uint8_t, 64> block_{};
    std::size_t fill_ = 0;
    std::uint64_t total_bits_ = 0;
};

}  // namespace detail

inline std::string sha256_hex(std::string_view data) {
    detail::Sha256 s;
    s.update(reinterpret_cast<const unsigned char*>(data.data()), data.size());
    auto digest = s.finish();
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint8_t b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

// One sweep axis: an ordered list of exact string tokens. Tokens are never
// reparsed for identity purposes, so "0.1" and "0.10" are distinct values.
struct HyperAxis {
    std::string name;
    std::vector<std::string> tokens;
};

struct HyperGrid {
    std::vector<HyperAxis> axes;

    void validate() const {
        if (axes.empty()) throw ConfigError("grid: no axes");
        std::vector<std::string> seen;
        for (const auto& ax : axes) {
            if (ax.name.empty()) throw ConfigError("grid: empty axis name");
            if (ax.name.find('=') != std::string::npos || ax.name.find('\n') != std::string::npos)
                throw ConfigError("grid: axis name may not contain '=' or newline");
            for (const auto& s : seen)
                if (s == ax.name) throw ConfigError("grid: duplicate axis " + ax.name);
            seen.push_back(ax.name);
            if (ax.tokens.empty()) throw ConfigError("grid: axis " + ax.name + " has no values");
            for (std::size_t i = 0; i < ax.tokens.size(); ++i) {
                if (ax.tokens[i].empty() || ax.tokens[i].find('\n') != std::string::npos)
                    throw ConfigError("grid: bad token on axis " + ax.name);
                for (std::size_t j = i + 1; j < ax.tokens.size(); ++j)
                    if (ax.tokens[i] == ax.tokens[j])
                        throw ConfigError("grid: duplicate token " + ax.tokens[i] + " on axis " +
                                          ax.name);
            }
        }
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& ax : axes) n *= ax.tokens.size();
        return n;
    }
};

// Ordered (axis, token) pairs, axis order matching the grid.
using Assignment = std::vector<std::pair<std::string, std::string>>;

// Full factorial expansion. The last axis varies fastest.
inline std::vector<Assignment> expand_grid(const HyperGrid& grid) {
    grid.validate();
    std::vector<Assignment> out;
    out.reserve(grid.size());
    Assignment current;
    for (const auto& ax : grid.axes) current.emplace_back(ax.name, std::string{});
    std::vector<std::size_t> idx(grid.axes.size(), 0);
    for (;;) {
        for (std::size_t a = 0; a < grid.axes.size(); ++a)
            current[a].second = grid.axes[a].tokens[idx[a]];
        out.push_back(current);
        std::size_t a = grid.axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < grid.axes[a].tokens.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
    }
}

// Canonical text form hashed into the run id: "axis=token" lines in grid
// axis order.
inline std::string canonical_assignment(const Assignment& assignment) {
    std::string s;
    for (const auto& [axis, token] : assignment) {
        s += axis;
        s += '=';
        s += token;
        s += '\n';
    }
    return s;
}

inline std::string run_id_for(const Assignment& assignment) {
    return sha256_hex(canonical_assignment(assignment)).substr(0, 16);
}

// JSON value helpers. JSON has no NaN or infinity literals, so non-finite
// doubles are stored as the same sentinel strings the text formatters use.
namespace detail {

using J = nlohmann::ordered_json;

inline J json_double(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

inline double double_from_json(const J& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
        if (s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    }
    throw StoreError("store: bad numeric value: " + j.dump());
}

inline J json_double_vec(const std::vector<double>& v) {
    J arr = J::array();
    for (double x : v) arr.push_back(json_double(x));
    return arr;
}

inline std::vector<double> double_vec_from_json(const J& j) {
    if (!j.is_array()) throw StoreError("store: expected array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(double_from_json(e));
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const ModelSpec& m) {
    nlohmann::ordered_json j;
    j["input_dim"] = m.input_dim;
    j["hidden"] = m.hidden_widths;
    j["num_classes"] = m.num_classes;
    j["dropout_p"] = detail::json_double(m.dropout_p);
    j["init"] = to_string(m.init);
    return j;
}

inline ModelSpec model_from_json(const nlohmann::ordered_json& j) {
    ModelSpec m;
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.hidden_widths = j.at("hidden").get<std::vector<std::size_t>>();
    m.num_classes = j.at("num_classes").get<int>();
    m.dropout_p = detail::double_from_json(j.at("dropout_p"));
    m.init = parse_init_scheme(j.at("init").get<std::string>());
    return m;
}

inline nlohmann::ordered_json train_cfg_to_json(const TrainConfig& t) {
    nlohmann::ordered_json j;
    j["optimizer"] = to_string(t.optimizer);
    j["lr"] = detail::json_double(t.learning_rate);
    j["batch_size"] = t.batch_size;
    j["weight_decay"] = detail::json_double(t.weight_decay);
    j["epochs"] = t.epochs;
    j["seed"] = t.seed;
    return j;
}

inline TrainConfig train_cfg_from_json(const nlohmann::ordered_json& j) {
    TrainConfig t;
    t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    t.learning_rate = detail::double_from_json(j.at("lr"));
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.weight_decay = detail::double_from_json(j.at("weight_decay"));
    t.epochs = j.at("epochs").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    return t;
}

inline nlohmann::ordered_json measure_to_json(const MeasureValue& v) {
    nlohmann::ordered_json j;
    j["name"] = v.name;
    j["category"] = to_string(v.category);
    j["value"] = detail::json_double(v.value);
    j["ok"] = v.ok;
    j["detail"] = v.detail;
    j["seed"] = v.compute_seed;
    return j;
}

inline MeasureValue measure_from_json(const nlohmann::ordered_json& j) {
    MeasureValue v;
    v.name = j.at("name").get<std::string>();
    if (!parse_category(j.at("category").get<std::string>(), v.category))
        throw StoreError("store: unknown measure category in " + j.dump());
    v.value = detail::double_from_json(j.at("value"));
    v.ok = j.at("ok").get<bool>();
    v.detail = j.at("detail").get<std::string>();
    v.compute_seed = j.at("seed").get<std::uint64_t>();
    return v;
}

// Append-only JSON-lines run store. Line one is the manifest (grid plus the
// sweep configuration text); run lines are immutable once written; measure
// lines may repeat, with the newest value winning per (run, measure) pair.
// A corrupt final line, the footprint of an interrupted append, is moved to
// "<path>.quarantine" and the store truncated back to health; corruption
// anywhere else is refused.
class Store {
  public:
    static Store create(const std::string& path, const HyperGrid& grid,
                        const std::string& config_text) {
        grid.validate();
        if (std::filesystem::exists(path)) throw StoreError("store already exists: " + path);
        Store st;
        st.path_ = path;
        st.grid_ = grid;
        st.config_text_ = config_text;
        detail::J j;
        j["type"] = "manifest";
        j["version"] = 1;
        detail::J axes = detail::J::array();
        for (const auto& ax : grid.axes) {
            detail::J a;
            a["name"] = ax.name;
            a["tokens"] = ax.tokens;
            axes.push_back(a);
        }
        j["axes"] = axes;
        j["config"] = config_text;
        st.append_line(j, /*create=*/true);
        return st;
    }

    static Store open(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw StoreError("cannot open store: " + path);
        std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        f.close();

        Store st;
        st.path_ = path;
        std::vector<std::pair<std::size_t, std::string>> lines;  // offset, text
        std::size_t pos = 0;
        while (pos < content.size()) {
            std::size_t nl = content.find('\n', pos);
            std::size_t end = (nl == std::string::npos) ? content.size() : nl;
            lines.emplace_back(pos, content.substr(pos, end - pos));
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }
        if (lines.empty()) throw StoreError("store is empty: " + path);

        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto& [offset, text] = lines[i];
            bool last = (i + 1 == lines.size());
            try {
                detail::J j = detail::J::parse(text, nullptr, /*allow_exceptions=*/true);
                st.apply_line(j, i);
            } catch (const std::exception& e) {
                if (last) {
                    st.quarantine_line_ = text;
                    std::ofstream q(path + ".quarantine", std::ios::app | std::ios::binary);
                    q << text << '\n';
                    q.close();
                    std::filesystem::resize_file(path, offset);
                    break;
                }
                throw StoreError("store corrupt at line " + std::to_string(i + 1) + ": " +
                                 e.what());
            }
        }
        if (!st.has_manifest_) throw StoreError("store has no manifest: " + path);
        return st;
    }

    const std::string& path() const { return path_; }
    const HyperGrid& grid() const { return grid_; }
    const std::string& config_text() const { return config_text_; }
    bool quarantined() const { return !quarantine_line_.empty(); }
    const std::string& quarantined_line() const { return quarantine_line_; }

    const std::map<std::string, RunRecord>& runs() const { return runs_; }
    bool has_run(const std::string& run_id) const { return runs_.count(run_id) > 0; }
    const RunRecord& run(const std::string& run_id) const {
        auto it = runs_.find(run_id);
        if (it == runs_.end()) throw StoreError("no such run: " + run_id);
        return it->second;
    }

    // Grid-ordered run id for a record's assignment; validates the axis set.
    std::string run_id_for_record(const RunRecord& rec) const {
        Assignment a;
        for (const auto& ax : grid_.axes) {
            auto it = rec.assignment.find(ax.name);
            if (it == rec.assignment.end())
                throw StoreError("assignment missing axis " + ax.name);
            a.emplace_back(ax.name, it->second);
        }
        if (a.size() != rec.assignment.size())
            throw StoreError("assignment has axes outside the grid");
        return run_id_for(a);
    }

    void add_run(const RunRecord& rec) {
        if (rec.run_id.empty()) throw StoreError("run has no id");
        if (runs_.count(rec.run_id)) throw StoreError("duplicate run: " + rec.run_id);
        detail::J j;
        j["type"] = "run";
        j["run_id"] = rec.run_id;
        detail::J asg = detail::J::object();
        for (const auto& ax : grid_.axes) {
            auto it = rec.assignment.find(ax.name);
            if (it == rec.assignment.end())
                throw StoreError("assignment missing axis " + ax.name);
            asg[ax.name] = it->second;
        }
        j["assignment"] = asg;
        j["status"] = rec.failed ? "failed" : "done";
        j["failure_reason"] = rec.failure_reason;
        j["model"] = model_to_json(rec.model);
        j["train"] = train_cfg_to_json(rec.train_cfg);
        j["init_params"] = detail::json_double_vec(rec.init_params.flatten());
        j["final_params"] = detail::json_double_vec(rec.final_params.flatten());
        j["train_acc"] = detail::json_double(rec.train_acc);
        j["test_acc_iid"] = detail::json_double(rec.test_acc_iid);
        detail::J shift = detail::J::object();
        for (const auto& [sev, acc] : rec.test_acc_shift)
            shift[std::to_string(sev)] = detail::json_double(acc);
        j["test_acc_shift"] = shift;
        j["epoch_losses"] = detail::json_double_vec(rec.epoch_losses);
        j["grad_norm_trace"] = detail::json_double_vec(rec.grad_norm_trace);
        detail::J snaps = detail::J::array();
        for (const auto& s : rec.grad_snapshots) snaps.push_back(detail::json_double_vec(s));
        j["grad_snapshots"] = snaps;
        j["wall_time_sec"] = detail::json_double(rec.wall_time_sec);
        append_line(j);
        RunRecord stored = rec;
        stored.measures.clear();  // measures arrive through their own lines
        runs_.emplace(rec.run_id, std::move(stored));
    }

    // Records (or re-records) measure values for a run. Per-measure
    // last-wins: an existing value for the same name is superseded.
    void set_measures(const std::string& run_id, const std::vector<MeasureValue>& values) {
        auto it = runs_.find(run_id);
        if (it == runs_.end()) throw StoreError("no such run: " + run_id);
        if (values.empty()) return;
        detail::J j;
        j["type"] = "measures";
        j["run_id"] = run_id;
        detail::J arr = detail::J::array();
        for (const auto& v : values) arr.push_back(measure_to_json(v));
        j["values"] = arr;
        append_line(j);
        for (const auto& v : values) it->second.measures[v.name] = v;
    }

    // Grid assignments that have no run line yet, in expansion order.
    std::vector<Assignment> pending() const {
        std::vector<Assignment> out;
        for (auto& a : expand_grid(grid_))
            if (!runs_.count(run_id_for(a))) out.push_back(std::move(a));
        return out;
    }

  private:
    Store() = default;

    void append_line(const detail::J& j, bool create = false) {
        std::ofstream f(path_, (create ? std::ios::trunc : std::ios::app) | std::ios::binary);
        if (!f) throw StoreError("cannot write store: " + path_);
        f << j.dump() << '\n';
        f.flush();
        if (!f) throw StoreError("write failed: " + path_);
    }

    void apply_line(const detail::J& j, std::size_t line_no) {
        const std::string type = j.at("type").get<std::string>();
        if (type == "manifest") {
            if (line_no != 0) throw StoreError("manifest must be the first line");
            grid_.axes.clear();
            for (const auto& a : j.at("axes")) {
                HyperAxis ax;
                ax.name = a.at("name").get<std::string>();
                ax.tokens = a.at("tokens").get<std::vector<std::string>>();
                grid_.axes.push_back(ax);
            }
            grid_.validate();
            config_text_ = j.at("config").get<std::string>();
            has_manifest_ = true;
            return;
        }
        if (!has_manifest_) throw StoreError("record before manifest");
        if (type == "run") {
            RunRecord rec;
            rec.run_id = j.at("run_id").get<std::string>();
            if (runs_.count(rec.run_id)) throw StoreError("duplicate run: " + rec.run_id);
            for (const auto& [k, v] : j.at("assignment").items())
                rec.assignment[k] = v.get<std::string>();
            const std::string status = j.at("status").get<std::string>();
            if (status != "done" && status != "failed")
                throw StoreError("bad run status: " + status);
            rec.failed = (status == "failed");
            rec.failure_reason = j.at("failure_reason").get<std::string>();
            rec.model = model_from_json(j.at("model"));
            rec.train_cfg = train_cfg_from_json(j.at("train"));
            Mlp mlp(rec.model);
            rec.init_params = mlp.init_params(0);
            rec.init_params.unflatten(detail::double_vec_from_json(j.at("init_params")));
            rec.final_params = mlp.init_params(0);
            rec.final_params.unflatten(detail::double_vec_from_json(j.at("final_params")));
            rec.train_acc = detail::double_from_json(j.at("train_acc"));
            rec.test_acc_iid = detail::double_from_json(j.at("test_acc_iid"));
            for (const auto& [k, v] : j.at("test_acc_shift").items())
                rec.test_acc_shift[std::stoi(k)] = detail::double_from_json(v);
            rec.epoch_losses = detail::double_vec_from_json(j.at("epoch_losses"));
            rec.grad_norm_trace = detail::double_vec_from_json(j.at("grad_norm_trace"));
            for (const auto& s : j.at("grad_snapshots"))
                rec.grad_snapshots.push_back(detail::double_vec_from_json(s));
            rec.wall_time_sec = detail::double_from_json(j.at("wall_time_sec"));
            runs_.emplace(rec.run_id, std::move(rec));
            return;
        }
        if (type == "measures") {
            const std::string run_id = j.at("run_id").get<std::string>();
            auto it = runs_.find(run_id);
            if (it == runs_.end()) throw StoreError("measures for unknown run: " + run_id);
            for (const auto& mv : j.at("values")) {
                MeasureValue v = measure_from_json(mv);
                it->second.measures[v.name] = v;
            }
            return;
        }
        throw StoreError("unknown record type: " + type);
    }

    std::string path_;
    HyperGrid grid_;
    std::string config_text_;
    std::map<std::string, RunRecord> runs_;
    std::string quarantine_line_;
    bool has_manifest_ = false;
};

}  // namespace genmeter
