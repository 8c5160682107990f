#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/summary.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

namespace detail {

// Merge sort counting strict inversions (left > right across the merge).
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf,
                                      std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;  // v[i..mid) are all strictly greater
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
              v.begin() + static_cast<long>(lo));
    return inv;
}

template <typename Key>
std::uint64_t tie_pairs(const std::vector<Key>& sorted) {
    std::uint64_t total = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        std::uint64_t t = j - i;
        total += t * (t - 1) / 2;
        i = j;
    }
    return total;
}

}  // namespace detail

// Kendall rank correlation without tie correction:
//   tau = (concordant - discordant) / (n (n - 1) / 2),
// tied pairs in either coordinate contribute zero to the numerator.
// O(n log n) via sort plus inversion counting.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("kendall_tau: length mismatch");
    std::size_t n = x.size();
    if (n < 2) throw Error("kendall_tau: need at least 2 observations");
    for (double v : x) require_finite(v, "kendall_tau");
    for (double v : y) require_finite(v, "kendall_tau");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;

    // Tie counts: pairs tied in x, in y, and in both.
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    std::uint64_t ties_x = detail::tie_pairs(xs);
    std::vector<std::pair<double, double>> xy(n);
    for (std::size_t i = 0; i < n; ++i) xy[i] = {xs[i], ys[i]};
    std::uint64_t ties_xy = detail::tie_pairs(xy);
    std::vector<double> ys_sorted = ys;
    std::sort(ys_sorted.begin(), ys_sorted.end());
    std::uint64_t ties_y = detail::tie_pairs(ys_sorted);

    // Inversions of y in x-order give the discordant count.
    std::vector<double> work = ys, buf(n);
    std::uint64_t swaps = detail::count_inversions(work, buf, 0, n);

    auto num = static_cast<double>(static_cast<std::int64_t>(n0) -
                                   static_cast<std::int64_t>(ties_x) -
                                   static_cast<std::int64_t>(ties_y) +
                                   static_cast<std::int64_t>(ties_xy) -
                                   2 * static_cast<std::int64_t>(swaps));
    return num / static_cast<double>(n0);
}

// One observation for predictivity statistics: the axis tokens of the
// run, the measure value, and the generalization gap target.
struct RunPoint {
    std::vector<std::string> tokens;  // aligned with the axis-name list
    double mu = 0.0;
    double g = 0.0;
};

namespace detail {

inline std::string join_key(const std::vector<std::string>& tokens,
                            const std::vector<std::size_t>& keep) {
    std::string k;
    for (std::size_t idx : keep) {
        k += tokens[idx];
        k += '\x1f';
    }
    return k;
}

inline void check_points(const std::vector<std::string>& axes,
                         const std::vector<RunPoint>& points) {
    for (const auto& p : points)
        if (p.tokens.size() != axes.size())
            throw ShapeError("stats: token count does not match axis count");
}

}  // namespace detail

struct PsiAxis {
    std::string axis;
    double mean_tau = 0.0;
    std::size_t subspaces = 0;  // groups with at least 2 members
};

struct PsiResult {
    double psi = std::numeric_limits<double>::quiet_NaN();
    std::vector<PsiAxis> axes;  // only axes that produced at least one subspace
};

// Granulated rank correlation: for each axis, hold every other axis fixed
// (exact token equality), compute tau inside each such subspace, average
// per axis, then average the per-axis means. Axes with no subspace of two
// or more runs are omitted.
inline PsiResult granulated_psi(const std::vector<std::string>& axes,
                                const std::vector<RunPoint>& points) {
    if (axes.empty()) throw Error("granulated_psi: no axes");
    detail::check_points(axes, points);

    PsiResult res;
    double axis_acc = 0.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (i != a) keep.push_back(i);
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < points.size(); ++i)
            groups[detail::join_key(points[i].tokens, keep)].push_back(i);

        double tau_acc = 0.0;
        std::size_t used = 0;
        for (const auto& [key, members] : groups) {
            (void)key;
            if (members.size() < 2) continue;
            std::vector<double> mu, g;
            for (std::size_t idx : members) {
                mu.push_back(points[idx].mu);
                g.push_back(points[idx].g);
            }
            tau_acc += kendall_tau(mu, g);
            ++used;
        }
        if (used == 0) continue;
        PsiAxis pa;
        pa.axis = axes[a];
        pa.mean_tau = tau_acc / static_cast<double>(used);
        pa.subspaces = used;
        res.axes.push_back(pa);
        axis_acc += pa.mean_tau;
    }
    if (!res.axes.empty()) res.psi = axis_acc / static_cast<double>(res.axes.size());
    return res;
}

// Seed-conditional variant: for every non-seed axis, fix all remaining
// axes except the seed, compute tau separately inside each seed value,
// and average over those per-seed cells.
inline PsiResult granulated_psi_seed_conditional(const std::vector<std::string>& axes,
                                                 const std::vector<RunPoint>& points,
                                                 const std::string& seed_axis = "seed") {
    detail::check_points(axes, points);
    std::optional<std::size_t> seed_idx;
    for (std::size_t i = 0; i < axes.size(); ++i)
        if (axes[i] == seed_axis) seed_idx = i;
    if (!seed_idx) throw Error("granulated_psi_seed_conditional: no axis named " + seed_axis);

    PsiResult res;
    double axis_acc = 0.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        if (a == *seed_idx) continue;
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (i != a && i != *seed_idx) keep.push_back(i);
        // Group by the fixed axes, then split each group by seed token.
        std::map<std::string, std::vector<std::size_t>> cells;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::string k = detail::join_key(points[i].tokens, keep);
            k += points[i].tokens[*seed_idx];
            cells[k].push_back(i);
        }
        double tau_acc = 0.0;
        std::size_t used = 0;
        for (const auto& [key, members] : cells) {
            (void)key;
            if (members.size() < 2) continue;
            std::vector<double> mu, g;
            for (std::size_t idx : members) {
                mu.push_back(points[idx].mu);
                g.push_back(points[idx].g);
            }
            tau_acc += kendall_tau(mu, g);
            ++used;
        }
        if (used == 0) continue;
        PsiAxis pa;
        pa.axis = axes[a];
        pa.mean_tau = tau_acc / static_cast<double>(used);
        pa.subspaces = used;
        res.axes.push_back(pa);
        axis_acc += pa.mean_tau;
    }
    if (!res.axes.empty()) res.psi = axis_acc / static_cast<double>(res.axes.size());
    return res;
}

// An environment: two hyperparameter combinations that differ in exactly
// one axis, with the seed axis marginalized out. Pairs cross the two
// run groups; each pair suffers loss 0 when the measure delta and the
// gap delta agree in sign, 1 when they disagree, and 1/2 on ties.
struct Environment {
    std::string axis;     // the axis the two combos differ on
    double sign_error = 0.0;
    double n_eff = 0.0;   // (sum w)^2 / sum w^2; equals the pair count for unit weights
    std::size_t pairs = 0;
};

struct SignErrorOptions {
    std::string seed_axis = "seed";
    double n_eff_min = 5.0;
    // Pair weight; unit weights by default.
    std::function<double(const RunPoint&, const RunPoint&)> weight;
};

inline std::vector<Environment> sign_error_environments(const std::vector<std::string>& axes,
                                                        const std::vector<RunPoint>& points,
                                                        const SignErrorOptions& opts = {}) {
    detail::check_points(axes, points);
    std::vector<std::size_t> combo_axes;
    for (std::size_t i = 0; i < axes.size(); ++i)
        if (axes[i] != opts.seed_axis) combo_axes.push_back(i);
    if (combo_axes.empty()) throw Error("sign_error_environments: only the seed axis present");

    // Group runs by their non-seed combo.
    std::map<std::string, std::vector<std::size_t>> combos;
    for (std::size_t i = 0; i < points.size(); ++i)
        combos[detail::join_key(points[i].tokens, combo_axes)].push_back(i);
    std::vector<const std::vector<std::size_t>*> groups;
    std::vector<std::size_t> reps;  // representative run per combo
    for (const auto& [key, members] : combos) {
        (void)key;
        groups.push_back(&members);
        reps.push_back(members.front());
    }

    auto sgn = [](double d) { return (d > 0.0) - (d < 0.0); };

    std::vector<Environment> envs;
    for (std::size_t c1 = 0; c1 < groups.size(); ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < groups.size(); ++c2) {
            // Do the combos differ in exactly one axis?
            std::optional<std::size_t> differing;
            bool more_than_one = false;
            for (std::size_t idx : combo_axes) {
                if (points[reps[c1]].tokens[idx] != points[reps[c2]].tokens[idx]) {
                    if (differing) {
                        more_than_one = true;
                        break;
                    }
                    differing = idx;
                }
            }
            if (more_than_one || !differing) continue;

            double wl = 0.0, wsum = 0.0, wsq = 0.0;
            std::size_t pairs = 0;
            for (std::size_t i : *groups[c1]) {
                for (std::size_t j : *groups[c2]) {
                    double w = opts.weight ? opts.weight(points[i], points[j]) : 1.0;
                    if (w <= 0.0) continue;
                    int smu = sgn(points[i].mu - points[j].mu);
                    int sg = sgn(points[i].g - points[j].g);
                    double loss = (1.0 - static_cast<double>(smu * sg)) / 2.0;
                    wl += w * loss;
                    wsum += w;
                    wsq += w * w;
                    ++pairs;
                }
            }
            if (pairs == 0) continue;
            Environment env;
            env.axis = axes[*differing];
            env.sign_error = wl / wsum;
            env.n_eff = wsum * wsum / wsq;
            env.pairs = pairs;
            envs.push_back(env);
        }
    }
    return envs;
}

struct SignErrorSummary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double p90 = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_env = 0;       // environments that passed the filter
    std::size_t n_filtered = 0;  // environments dropped for low n_eff
};

inline SignErrorSummary summarize_sign_errors(const std::vector<Environment>& envs,
                                              double n_eff_min) {
    SignErrorSummary s;
    std::vector<double> vals;
    for (const auto& e : envs) {
        if (e.n_eff < n_eff_min) {
            ++s.n_filtered;
            continue;
        }
        vals.push_back(e.sign_error);
    }
    s.n_env = vals.size();
    if (vals.empty()) return s;  // NaNs signal an empty summary
    s.mean = mean_of(vals);
    s.p90 = percentile_lower(vals, 0.9);
    s.max = *std::max_element(vals.begin(), vals.end());
    return s;
}

// Ordered run pairs (i, j), i != j, in lexicographic order. When the full
// count exceeds the cap, a seeded uniform subsample of exactly cap pairs
// is drawn instead.
inline std::vector<std::pair<std::size_t, std::size_t>> sign_pairs(std::size_t n, std::size_t cap,
                                                                   std::uint64_t seed) {
    if (n < 2) throw Error("sign_pairs: need at least 2 runs");
    if (cap == 0) throw Error("sign_pairs: zero pair budget");
    std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1);
    auto decode = [n](std::uint64_t linear) {
        std::size_t i = static_cast<std::size_t>(linear / (n - 1));
        std::size_t r = static_cast<std::size_t>(linear % (n - 1));
        return std::pair<std::size_t, std::size_t>{i, r < i ? r : r + 1};
    };
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (total <= cap) {
        out.reserve(total);
        for (std::uint64_t t = 0; t < total; ++t) out.push_back(decode(t));
        return out;
    }
    // Floyd's sampling keeps memory proportional to the cap, not the
    // quadratic pair count.
    Rng rng(derive_seed(seed, "sign_pairs"));
    std::set<std::uint64_t> picks;
    for (std::uint64_t j = total - cap; j < total; ++j) {
        std::uint64_t t = static_cast<std::uint64_t>(rng.index(static_cast<std::size_t>(j + 1)));
        if (!picks.insert(t).second) picks.insert(j);
    }
    out.reserve(cap);
    for (std::uint64_t t : picks) out.push_back(decode(t));
    return out;
}

struct NcmiResult {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;  // conditional target entropy was zero
};

// Plug-in normalized conditional mutual information between the measure
// sign and the gap sign across run pairs, conditioned on the tokens of
// the subset axes for both runs. Natural log; result clamped to [0, 1].
inline NcmiResult normalized_cmi(const std::vector<std::string>& axes,
                                 const std::vector<RunPoint>& points,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                 const std::vector<std::size_t>& subset) {
    detail::check_points(axes, points);
    if (pairs.empty()) throw Error("normalized_cmi: no pairs");
    for (std::size_t idx : subset)
        if (idx >= axes.size()) throw Error("normalized_cmi: subset index out of range");

    auto sgn = [](double d) { return (d > 0.0) - (d < 0.0); };

    // Joint counts per stratum u: n[u][vmu+1][vg+1].
    struct Cell {
        std::uint64_t joint[3][3] = {};
        std::uint64_t total = 0;
    };
    std::map<std::string, Cell> strata;
    for (const auto& [i, j] : pairs) {
        std::string key = detail::join_key(points[i].tokens, subset);
        key += '\x1e';
        key += detail::join_key(points[j].tokens, subset);
        Cell& c = strata[key];
        int vmu = sgn(points[i].mu - points[j].mu);
        int vg = sgn(points[i].g - points[j].g);
        c.joint[vmu + 1][vg + 1] += 1;
        c.total += 1;
    }

    double n_all = static_cast<double>(pairs.size());
    double mi = 0.0, cond_h = 0.0;
    for (const auto& [key, c] : strata) {
        (void)key;
        double nt = static_cast<double>(c.total);
        std::uint64_t row[3] = {}, col[3] = {};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                row[a] += c.joint[a][b];
                col[b] += c.joint[a][b];
            }
        for (int b = 0; b < 3; ++b) {
            if (col[b] == 0) continue;
            double p = static_cast<double>(col[b]) / nt;
            cond_h += (nt / n_all) * (-p * std::log(p));
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                if (c.joint[a][b] == 0) continue;
                double pj = static_cast<double>(c.joint[a][b]) / nt;
                double pa = static_cast<double>(row[a]) / nt;
                double pb = static_cast<double>(col[b]) / nt;
                mi += (nt / n_all) * pj * std::log(pj / (pa * pb));
            }
    }

    NcmiResult res;
    if (cond_h <= 0.0) {
        res.degenerate = true;
        return res;
    }
    res.value = std::clamp(mi / cond_h, 0.0, 1.0);
    return res;
}

struct CmiScore {
    double value = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> argmin_subset;  // axis names, may be empty for S = {}
    bool ok = false;
    std::size_t degenerate_subsets = 0;
};

// Worst-case (minimum) normalized CMI over all axis subsets up to the
// given depth, mirroring the idea that a good measure should stay
// informative no matter which hyperparameters are held fixed. Subsets
// whose conditional entropy vanishes are excluded.
inline CmiScore cmi_score(const std::vector<std::string>& axes,
                          const std::vector<RunPoint>& points,
                          const std::vector<std::string>& hyper_axes, int depth, std::size_t cap,
                          std::uint64_t seed) {
    detail::check_points(axes, points);
    if (depth < 0) throw Error("cmi_score: negative depth");
    std::vector<std::size_t> hyper_idx;
    for (const auto& name : hyper_axes) {
        bool found = false;
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (axes[i] == name) {
                hyper_idx.push_back(i);
                found = true;
            }
        if (!found) throw Error("cmi_score: unknown axis " + name);
    }

    auto pairs = sign_pairs(points.size(), cap, seed);

    // Enumerate subsets of the hyper axes with size <= depth.
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::size_t> current;
    std::function<void(std::size_t)> build = [&](std::size_t start) {
        subsets.push_back(current);
        if (static_cast<int>(current.size()) == depth) return;
        for (std::size_t i = start; i < hyper_idx.size(); ++i) {
            current.push_back(hyper_idx[i]);
            build(i + 1);
            current.pop_back();
        }
    };
    build(0);

    CmiScore best;
    for (const auto& s : subsets) {
        NcmiResult r = normalized_cmi(axes, points, pairs, s);
        if (r.degenerate) {
            ++best.degenerate_subsets;
            continue;
        }
        if (!best.ok || r.value < best.value) {
            best.ok = true;
            best.value = r.value;
            best.argmin_subset.clear();
            for (std::size_t idx : s) best.argmin_subset.push_back(axes[idx]);
        }
    }
    return best;
}

// Target selector for gap statistics: the IID split or a shifted split
// at a given severity.
struct GapTarget {
    bool shifted = false;
    int severity = 0;
};

inline GapTarget parse_gap_target(const std::string& s) {
    if (s == "iid") return {};
    if (s.rfind("shift:", 0) == 0) {
        GapTarget t;
        t.shifted = true;
        try {
            std::size_t used = 0;
            t.severity = std::stoi(s.substr(6), &used);
            if (used != s.size() - 6) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw ConfigError("bad gap target: " + s);
        }
        if (t.severity < 1 || t.severity > 5)
            throw ConfigError("gap target severity out of range: " + s);
        return t;
    }
    throw ConfigError("bad gap target: " + s + " (expected iid or shift:K)");
}

inline std::string to_string(const GapTarget& t) {
    if (!t.shifted) return "iid";
    return "shift:" + std::to_string(t.severity);
}

}  // namespace genmeter
