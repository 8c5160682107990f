#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "genmeter/config.hpp"
#include "genmeter/format.hpp"
#include "genmeter/measures/catalog.hpp"
#include "genmeter/stats.hpp"
#include "genmeter/store.hpp"

namespace genmeter {

// Predictivity summary for one measure against one gap target.
struct MeasureStats {
    std::string measure;
    MeasureCategory category = MeasureCategory::kBaselineOutput;
    std::string target;
    std::size_t points = 0;  // usable (run, value) observations
    PsiResult psi;
    SignErrorSummary sign;
    CmiScore cmi;
};

struct StatsReport {
    std::vector<std::string> axis_names;  // grid order
    std::vector<std::string> targets;     // as configured
    std::vector<MeasureStats> entries;    // catalog order x target order
};

namespace detail {

inline std::vector<RunPoint> collect_points(const Store& store, const std::string& measure,
                                            const GapTarget& target) {
    std::vector<RunPoint> pts;
    for (const auto& [run_id, rec] : store.runs()) {
        (void)run_id;
        if (rec.failed) continue;
        auto it = rec.measures.find(measure);
        if (it == rec.measures.end() || !it->second.ok) continue;
        RunPoint p;
        for (const auto& ax : store.grid().axes) p.tokens.push_back(rec.assignment.at(ax.name));
        p.mu = it->second.value;
        p.g = target.shifted ? rec.gap_shift(target.severity) : rec.gap_iid();
        pts.push_back(std::move(p));
    }
    return pts;
}

}  // namespace detail

// Runs the full statistics pass over every measure found in the store,
// against every configured gap target. Measures appear in catalog order;
// runs that failed, or whose value for a measure is itself failed, are
// excluded from that measure's observations.
inline StatsReport compute_stats_report(const Store& store, const StatsSettings& settings) {
    settings.validate();
    StatsReport report;
    for (const auto& ax : store.grid().axes) report.axis_names.push_back(ax.name);
    report.targets = settings.targets;

    std::set<std::string> seen;
    for (const auto& [id, rec] : store.runs()) {
        (void)id;
        for (const auto& [name, v] : rec.measures) {
            (void)v;
            seen.insert(name);
        }
    }
    std::vector<std::string> measures(seen.begin(), seen.end());
    std::sort(measures.begin(), measures.end(), [](const std::string& a, const std::string& b) {
        return catalog_index(a) < catalog_index(b);
    });

    std::vector<std::string> hyper_axes;
    for (const auto& name : report.axis_names)
        if (name != "seed") hyper_axes.push_back(name);

    for (const auto& measure : measures) {
        for (const auto& target_text : settings.targets) {
            GapTarget target = parse_gap_target(target_text);
            MeasureStats entry;
            entry.measure = measure;
            entry.category = category_of(measure);
            entry.target = target_text;
            std::vector<RunPoint> pts = detail::collect_points(store, measure, target);
            entry.points = pts.size();
            if (pts.size() >= 2) {
                entry.psi = granulated_psi(report.axis_names, pts);
                SignErrorOptions opts;
                opts.n_eff_min = settings.n_eff_min;
                entry.sign = summarize_sign_errors(
                    sign_error_environments(report.axis_names, pts, opts), settings.n_eff_min);
                entry.cmi = cmi_score(report.axis_names, pts, hyper_axes, settings.cmi_depth,
                                      settings.pair_cap,
                                      derive_seed(settings.seed, measure + "\x1f" + target_text));
            }
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

// ---- CSV emission -------------------------------------------------------
//
// All tables are deterministic byte-for-byte: fixed headers, catalog row
// order, shortest round-trip numbers with NaN/Infinity sentinels.

inline void write_psi_table_csv(std::ostream& os, const StatsReport& report) {
    os << "measure,category,axis,target,mean_tau,psi\n";
    for (const auto& e : report.entries) {
        for (const auto& axis : report.axis_names) {
            double mean_tau = std::numeric_limits<double>::quiet_NaN();
            for (const auto& pa : e.psi.axes)
                if (pa.axis == axis) mean_tau = pa.mean_tau;
            os << e.measure << ',' << to_string(e.category) << ',' << axis << ',' << e.target
               << ',' << format_double(mean_tau) << ',' << format_double(e.psi.psi) << '\n';
        }
    }
}

inline void write_sign_error_csv(std::ostream& os, const StatsReport& report) {
    os << "measure,target,mean,p90,max,n_env,n_filtered\n";
    for (const auto& e : report.entries)
        os << e.measure << ',' << e.target << ',' << format_double(e.sign.mean) << ','
           << format_double(e.sign.p90) << ',' << format_double(e.sign.max) << ','
           << e.sign.n_env << ',' << e.sign.n_filtered << '\n';
}

inline void write_cmi_csv(std::ostream& os, const StatsReport& report) {
    os << "measure,target,K,argmin_subset\n";
    for (const auto& e : report.entries) {
        std::string subset;
        for (const auto& name : e.cmi.argmin_subset) {
            if (!subset.empty()) subset += '+';
            subset += name;
        }
        os << e.measure << ',' << e.target << ',' << format_double(e.cmi.value) << ',' << subset
           << '\n';
    }
}

inline void write_measures_csv(std::ostream& os, const Store& store) {
    os << "run_id,name,category,value,status\n";
    for (const auto& [run_id, rec] : store.runs()) {
        std::vector<const MeasureValue*> vals;
        for (const auto& [name, v] : rec.measures) {
            (void)name;
            vals.push_back(&v);
        }
        std::sort(vals.begin(), vals.end(), [](const MeasureValue* a, const MeasureValue* b) {
            return catalog_index(a->name) < catalog_index(b->name);
        });
        for (const MeasureValue* v : vals)
            os << run_id << ',' << v->name << ',' << to_string(v->category) << ','
               << format_double(v->value) << ',' << (v->ok ? "ok" : "failed") << '\n';
    }
}

// ---- CSV reading (for the plotting stage) -------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                                      const std::string& expected_header) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open csv: " + path);
    std::string line;
    if (!std::getline(f, line) || line != expected_header)
        throw Error("unexpected header in " + path);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        // A trailing empty field drops out of the getline loop; restore it.
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double parse_csv_double(const std::string& s) {
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace detail

// ---- SVG plotting -------------------------------------------------------
//
// Hand-rolled SVG with all coordinates rounded to two decimals, so a rerun
// over identical inputs reproduces files byte-for-byte.

// Affine map from data space to a pixel rectangle. SVG y grows downward,
// so the vertical map is flipped: larger data y lands higher on screen.
struct PlotFrame {
    double x0 = -1.0, x1 = 1.0;  // data range, x
    double y0 = -1.0, y1 = 1.0;  // data range, y
    double px = 0.0, py = 0.0;   // pixel origin (top-left of the frame)
    double pw = 100.0, ph = 100.0;

    double sx(double x) const { return px + (x - x0) / (x1 - x0) * pw; }
    double sy(double y) const { return py + (y1 - y) / (y1 - y0) * ph; }
};

namespace detail {

inline std::string c2(double v) { return format_fixed(v, 2); }

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

inline void svg_open(std::ostream& os, double w, double h) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c2(w) << "\" height=\""
       << c2(h) << "\" viewBox=\"0 0 " << c2(w) << " " << c2(h) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << c2(w) << "\" height=\"" << c2(h)
       << "\" fill=\"white\"/>\n";
}

inline void svg_line(std::ostream& os, double x1, double y1, double x2, double y2,
                     const std::string& stroke, const std::string& extra = "") {
    os << "<line x1=\"" << c2(x1) << "\" y1=\"" << c2(y1) << "\" x2=\"" << c2(x2) << "\" y2=\""
       << c2(y2) << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
}

inline void svg_text(std::ostream& os, double x, double y, const std::string& text, int size,
                     const std::string& extra = "") {
    os << "<text x=\"" << c2(x) << "\" y=\"" << c2(y) << "\" font-family=\"monospace\" "
       << "font-size=\"" << size << "\"" << extra << ">" << svg_escape(text) << "</text>\n";
}

inline void svg_circle(std::ostream& os, double x, double y, double r, const std::string& fill,
                       const std::string& extra = "") {
    os << "<circle cx=\"" << c2(x) << "\" cy=\"" << c2(y) << "\" r=\"" << c2(r) << "\" fill=\""
       << fill << "\"" << extra << "/>\n";
}

}  // namespace detail

// Scatter of per-measure rank correlations, IID target on x, a shifted
// target on y, one plot per measure category. Quadrant gridlines mark the
// sign boundaries; measures missing either coordinate are dropped, and a
// plot with nothing to show says so instead of rendering an empty frame.
inline void write_psi_scatter_svg(std::ostream& os, const std::string& category,
                                  const std::string& x_target, const std::string& y_target,
                                  const std::vector<std::string>& names,
                                  const std::vector<double>& xs, const std::vector<double>& ys) {
    const double w = 480, h = 480;
    PlotFrame frame;
    frame.px = 60;
    frame.py = 50;
    frame.pw = w - 90;
    frame.ph = h - 100;
    detail::svg_open(os, w, h);
    detail::svg_text(os, 60, 28, "psi by measure: " + category, 14);
    detail::svg_text(os, 60, 44, "x: " + x_target + "  y: " + y_target, 11,
                     " fill=\"#555555\"");
    os << "<rect x=\"" << detail::c2(frame.px) << "\" y=\"" << detail::c2(frame.py)
       << "\" width=\"" << detail::c2(frame.pw) << "\" height=\"" << detail::c2(frame.ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    // Quadrant gridlines at zero.
    detail::svg_line(os, frame.sx(0), frame.py, frame.sx(0), frame.py + frame.ph, "#999999",
                     " stroke-dasharray=\"4 3\"");
    detail::svg_line(os, frame.px, frame.sy(0), frame.px + frame.pw, frame.sy(0), "#999999",
                     " stroke-dasharray=\"4 3\"");
    for (double t : {-1.0, 0.0, 1.0}) {
        detail::svg_text(os, frame.sx(t) - 8, frame.py + frame.ph + 16, detail::c2(t), 10);
        detail::svg_text(os, frame.px - 34, frame.sy(t) + 4, detail::c2(t), 10);
    }

    std::size_t drawn = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
        double x = frame.sx(std::clamp(xs[i], -1.0, 1.0));
        double y = frame.sy(std::clamp(ys[i], -1.0, 1.0));
        detail::svg_circle(os, x, y, 3.5, "#1f6fb2");
        detail::svg_text(os, x + 5, y + 3, names[i], 9, " fill=\"#333333\"");
        ++drawn;
    }
    if (drawn == 0)
        detail::svg_text(os, frame.px + frame.pw / 2 - 28, frame.py + frame.ph / 2, "no data",
                         13, " fill=\"#888888\"");
    os << "</svg>\n";
}

// One row per measure: mean (filled), p90 (open), max (tick) of the
// per-environment sign error, on a fixed [0, 1] scale with the chance
// level marked at one half.
inline void write_sign_error_panel_svg(std::ostream& os, const std::string& target,
                                       const std::vector<std::string>& names,
                                       const std::vector<SignErrorSummary>& rows) {
    const double row_h = 16, label_w = 230;
    const double w = 560, h = 70 + row_h * static_cast<double>(names.size());
    PlotFrame frame;
    frame.x0 = 0.0;
    frame.x1 = 1.0;
    frame.y0 = 0.0;
    frame.y1 = 1.0;
    frame.px = label_w;
    frame.py = 50;
    frame.pw = w - label_w - 30;
    frame.ph = row_h * static_cast<double>(names.size());
    detail::svg_open(os, w, h);
    detail::svg_text(os, 20, 28, "environment sign error: " + target, 14);
    for (double t : {0.0, 0.5, 1.0}) {
        detail::svg_line(os, frame.sx(t), frame.py, frame.sx(t), frame.py + frame.ph, "#cccccc",
                         t == 0.5 ? " stroke-dasharray=\"4 3\"" : "");
        detail::svg_text(os, frame.sx(t) - 8, frame.py + frame.ph + 14, detail::c2(t), 10);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        double y = frame.py + row_h * (static_cast<double>(i) + 0.5);
        detail::svg_text(os, 20, y + 3, names[i], 9);
        const SignErrorSummary& s = rows[i];
        if (s.n_env == 0 || !std::isfinite(s.mean)) {
            detail::svg_text(os, frame.sx(0.0) + 4, y + 3, "n/a", 9, " fill=\"#aaaaaa\"");
            continue;
        }
        detail::svg_line(os, frame.sx(s.mean), y - 4, frame.sx(s.mean), y + 4, "#1f6fb2");
        detail::svg_circle(os, frame.sx(s.mean), y, 3.0, "#1f6fb2");
        detail::svg_circle(os, frame.sx(s.p90), y, 3.0, "none",
                           " stroke=\"#b25f1f\" stroke-width=\"1.2\"");
        detail::svg_line(os, frame.sx(s.max), y - 5, frame.sx(s.max), y + 5, "#444444");
    }
    os << "</svg>\n";
}

// ---- directory-level entry points ---------------------------------------

inline const char* kPsiTableFile = "psi_table.csv";
inline const char* kSignErrorFile = "sign_error.csv";
inline const char* kCmiFile = "cmi.csv";
inline const char* kMeasuresFile = "measures.csv";

// Writes the four CSV tables into out_dir (created if absent).
inline void write_report_dir(const std::string& out_dir, const Store& store,
                             const StatsReport& report) {
    std::filesystem::create_directories(out_dir);
    auto open = [&](const char* name) {
        std::ofstream f(std::filesystem::path(out_dir) / name, std::ios::binary);
        if (!f) throw Error(std::string("cannot write ") + name + " in " + out_dir);
        return f;
    };
    {
        auto f = open(kPsiTableFile);
        write_psi_table_csv(f, report);
    }
    {
        auto f = open(kSignErrorFile);
        write_sign_error_csv(f, report);
    }
    {
        auto f = open(kCmiFile);
        write_cmi_csv(f, report);
    }
    {
        auto f = open(kMeasuresFile);
        write_measures_csv(f, store);
    }
}

inline std::string sanitize_target(const std::string& target) {
    std::string out = target;
    std::replace(out.begin(), out.end(), ':', '_');
    return out;
}

// Renders SVG plots from the CSV tables in dir: one psi scatter per
// category (IID x-axis against the first shifted target, when present)
// and one sign-error panel per target. Returns the files written.
inline std::vector<std::string> write_plots(const std::string& dir) {
    namespace fs = std::filesystem;
    auto psi_rows = detail::read_csv((fs::path(dir) / kPsiTableFile).string(),
                                     "measure,category,axis,target,mean_tau,psi");
    auto sign_rows = detail::read_csv((fs::path(dir) / kSignErrorFile).string(),
                                      "measure,target,mean,p90,max,n_env,n_filtered");

    // measure -> target -> psi (identical across that measure's axis rows)
    std::map<std::string, std::map<std::string, double>> psi;
    std::map<std::string, std::string> category_of_measure;
    std::vector<std::string> measure_order, target_order;
    for (const auto& row : psi_rows) {
        if (row.size() != 6) throw Error("psi_table.csv: bad row");
        psi[row[0]][row[3]] = detail::parse_csv_double(row[5]);
        category_of_measure[row[0]] = row[1];
        if (std::find(measure_order.begin(), measure_order.end(), row[0]) == measure_order.end())
            measure_order.push_back(row[0]);
        if (std::find(target_order.begin(), target_order.end(), row[3]) == target_order.end())
            target_order.push_back(row[3]);
    }
    if (target_order.empty()) throw Error("psi_table.csv: no rows");
    const std::string x_target = target_order.front();
    std::string y_target;
    for (const auto& t : target_order)
        if (t != x_target && t.rfind("shift:", 0) == 0) {
            y_target = t;
            break;
        }

    std::vector<std::string> written;
    std::vector<std::string> categories;
    for (const auto& m : measure_order) {
        const std::string& c = category_of_measure[m];
        if (std::find(categories.begin(), categories.end(), c) == categories.end())
            categories.push_back(c);
    }
    for (const auto& cat : categories) {
        std::vector<std::string> names;
        std::vector<double> xs, ys;
        for (const auto& m : measure_order) {
            if (category_of_measure[m] != cat) continue;
            names.push_back(m);
            xs.push_back(psi[m].count(x_target) ? psi[m][x_target]
                                                : std::numeric_limits<double>::quiet_NaN());
            ys.push_back(!y_target.empty() && psi[m].count(y_target)
                             ? psi[m][y_target]
                             : std::numeric_limits<double>::quiet_NaN());
        }
        std::string file = (fs::path(dir) / ("scatter_" + cat + ".svg")).string();
        std::ofstream f(file, std::ios::binary);
        if (!f) throw Error("cannot write " + file);
        write_psi_scatter_svg(f, cat, x_target, y_target.empty() ? "(none)" : y_target, names,
                              xs, ys);
        written.push_back(file);
    }

    // target -> measure -> summary
    std::map<std::string, std::map<std::string, SignErrorSummary>> sign;
    for (const auto& row : sign_rows) {
        if (row.size() != 7) throw Error("sign_error.csv: bad row");
        SignErrorSummary s;
        s.mean = detail::parse_csv_double(row[2]);
        s.p90 = detail::parse_csv_double(row[3]);
        s.max = detail::parse_csv_double(row[4]);
        s.n_env = static_cast<std::size_t>(std::stoull(row[5]));
        s.n_filtered = static_cast<std::size_t>(std::stoull(row[6]));
        sign[row[1]][row[0]] = s;
    }
    for (const auto& t : target_order) {
        std::vector<std::string> names;
        std::vector<SignErrorSummary> rows;
        for (const auto& m : measure_order) {
            auto it = sign.find(t);
            if (it == sign.end() || !it->second.count(m)) continue;
            names.push_back(m);
            rows.push_back(it->second[m]);
        }
        std::string file = (fs::path(dir) / ("sign_error_" + sanitize_target(t) + ".svg")).string();
        std::ofstream f(file, std::ios::binary);
        if (!f) throw Error("cannot write " + file);
        write_sign_error_panel_svg(f, t, names, rows);
        written.push_back(file);
    }
    return written;
}

}  // namespace genmeter
