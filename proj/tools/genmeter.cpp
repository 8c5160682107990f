// Command-line front end: run hyperparameter sweeps, compute the measure
// catalog over stored runs, score measure predictivity, and render plots.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "genmeter/genmeter.hpp"

namespace {

using namespace genmeter;

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
LogLevel g_log = LogLevel::kInfo;

void log_info(const std::string& msg) {
    if (g_log >= LogLevel::kInfo) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (g_log >= LogLevel::kDebug) std::cerr << msg << "\n";
}

std::string single_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

// Store path resolution: explicit argument first, then the environment.
std::string resolve_store(const std::string& arg) {
    if (!arg.empty()) return arg;
    if (const char* env = std::getenv("GENMETER_STORE"); env && *env) return env;
    throw Error("no store path given (pass one or set GENMETER_STORE)");
}

// Runs fn(0..count-1) on `jobs` threads; the first exception wins and is
// rethrown on the caller's thread after all workers drain.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, const Fn& fn) {
    if (count == 0) return;
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

int cmd_sweep_run(const std::string& config_path, const std::string& store_arg, int jobs,
                  std::uint64_t seed_offset) {
    SweepConfig cfg = load_sweep_config(config_path);
    const std::string store_path = resolve_store(store_arg);

    Store store = [&] {
        if (std::filesystem::exists(store_path)) {
            Store st = Store::open(store_path);
            if (st.quarantined())
                log_info("warning: quarantined corrupt trailing line in " + store_path);
            if (st.config_text() != cfg.raw_text)
                throw Error("store " + store_path + " was created from a different config");
            return st;
        }
        return Store::create(store_path, cfg.grid, cfg.raw_text);
    }();

    const DatasetBundle data = make_dataset(cfg.dataset);
    const auto todo = store.pending();
    log_info("sweep: " + std::to_string(todo.size()) + " of " +
             std::to_string(store.grid().size()) + " runs pending");

    std::mutex store_mutex;
    std::atomic<std::size_t> done{0};
    parallel_for(todo.size(), jobs, [&](std::size_t i) {
        const Assignment& a = todo[i];
        RunRecord rec = train_run(data, cfg.model_for(a), cfg.train_for(a, seed_offset));
        for (const auto& [axis, token] : a) rec.assignment[axis] = token;
        rec.run_id = run_id_for(a);
        {
            std::lock_guard<std::mutex> lk(store_mutex);
            store.add_run(rec);
        }
        std::size_t k = ++done;
        log_info("run " + rec.run_id + " [" + std::to_string(k) + "/" +
                 std::to_string(todo.size()) + "] " + (rec.failed ? "failed" : "done"));
    });

    std::size_t failed = 0;
    for (const auto& [id, rec] : store.runs()) {
        (void)id;
        if (rec.failed) ++failed;
    }
    if (failed > 0) {
        std::cerr << "error: " << failed << " of " << store.runs().size() << " runs failed\n";
        return 1;
    }
    std::cout << store_path << ": " << store.runs().size() << " runs complete\n";
    return 0;
}

int cmd_measure_compute(const std::string& store_arg, const std::vector<std::string>& only,
                        bool recompute, int jobs) {
    const std::string store_path = resolve_store(store_arg);
    Store store = Store::open(store_path);
    if (store.quarantined())
        log_info("warning: quarantined corrupt trailing line in " + store_path);
    SweepConfig cfg = parse_sweep_config(store.config_text());
    const DatasetBundle data = make_dataset(cfg.dataset);

    MeasureFilter filter;
    filter.tokens = only.empty() ? cfg.measure_only : only;
    filter.validate();
    std::vector<std::string> selected;
    for (const auto& e : measure_catalog())
        if (filter.selects(e)) selected.push_back(e.name);
    if (selected.empty()) throw Error("measure filter selects nothing");

    std::vector<std::string> work;
    for (const auto& [run_id, rec] : store.runs()) {
        if (recompute) {
            work.push_back(run_id);
            continue;
        }
        for (const auto& name : selected)
            if (!rec.measures.count(name)) {
                work.push_back(run_id);
                break;
            }
    }
    log_info("measures: " + std::to_string(work.size()) + " of " +
             std::to_string(store.runs().size()) + " runs need " +
             std::to_string(selected.size()) + " measures");

    std::mutex store_mutex;
    std::atomic<std::size_t> done{0};
    parallel_for(work.size(), jobs, [&](std::size_t i) {
        const RunRecord& rec = store.run(work[i]);
        auto values = compute_measures(rec, data, cfg.measures, filter);
        {
            std::lock_guard<std::mutex> lk(store_mutex);
            store.set_measures(work[i], values);
        }
        std::size_t k = ++done;
        log_debug("measures " + work[i] + " [" + std::to_string(k) + "/" +
                  std::to_string(work.size()) + "]");
    });

    std::cout << store_path << ": measures current for " << store.runs().size() << " runs\n";
    return 0;
}

int cmd_stats(const std::string& store_arg, const std::string& targets_csv,
              const std::string& out_dir) {
    const std::string store_path = resolve_store(store_arg);
    Store store = Store::open(store_path);
    SweepConfig cfg = parse_sweep_config(store.config_text());
    StatsSettings settings = cfg.stats;
    if (!targets_csv.empty()) settings.targets = detail::split_list(targets_csv);
    settings.validate();

    StatsReport report = compute_stats_report(store, settings);
    write_report_dir(out_dir, store, report);
    for (const char* f : {kPsiTableFile, kSignErrorFile, kCmiFile, kMeasuresFile})
        std::cout << (std::filesystem::path(out_dir) / f).string() << "\n";
    return 0;
}

int cmd_plot(const std::string& dir) {
    for (const auto& f : write_plots(dir)) std::cout << f << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        CLI::App app{"sweep engine for generalization-measure benchmarking"};
        app.require_subcommand(1);
        // Let global options appear after subcommand arguments.
        app.fallthrough();

        int jobs = 1;
        std::uint64_t seed_offset = 0;
        std::string log_level = "info";
        app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 512));
        app.add_option("--seed-offset", seed_offset, "added to every run seed");
        app.add_option("--log-level", log_level, "quiet, info, or debug")
            ->check(CLI::IsMember({"quiet", "info", "debug"}));

        // sweep run <config> [--store PATH]
        auto* sweep = app.add_subcommand("sweep", "train a hyperparameter grid");
        sweep->fallthrough();
        sweep->require_subcommand(1);
        auto* sweep_run = sweep->add_subcommand("run", "train all pending grid points");
        sweep_run->fallthrough();
        std::string config_path, sweep_store;
        sweep_run->add_option("config", config_path, "sweep config (ini)")
            ->required()
            ->check(CLI::ExistingFile);
        sweep_run->add_option("--store", sweep_store, "run store path (or GENMETER_STORE)");

        // measure compute [store] [--only ...] [--recompute]
        auto* measure = app.add_subcommand("measure", "compute generalization measures");
        measure->fallthrough();
        measure->require_subcommand(1);
        auto* measure_compute =
            measure->add_subcommand("compute", "fill in measures for stored runs");
        measure_compute->fallthrough();
        std::string measure_store;
        std::vector<std::string> only;
        bool recompute = false;
        measure_compute->add_option("store", measure_store, "run store (or GENMETER_STORE)");
        measure_compute->add_option("--only", only,
                                    "restrict to measure names or categories (repeatable)");
        measure_compute->add_flag("--recompute", recompute, "recompute even if present");

        // stats [store] --out DIR [--targets ...]
        auto* stats = app.add_subcommand("stats", "score measure predictivity");
        stats->fallthrough();
        std::string stats_store, targets_csv, out_dir;
        stats->add_option("store", stats_store, "run store (or GENMETER_STORE)");
        stats->add_option("--targets", targets_csv, "comma list, e.g. iid,shift:3");
        stats->add_option("--out", out_dir, "output directory for csv tables")->required();

        // plot <dir>
        auto* plot = app.add_subcommand("plot", "render svg plots from a stats directory");
        plot->fallthrough();
        std::string plot_dir;
        plot->add_option("dir", plot_dir, "directory holding the csv tables")
            ->required()
            ->check(CLI::ExistingDirectory);

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e);  // help text
            throw Error(e.what());
        }

        if (log_level == "quiet") g_log = LogLevel::kQuiet;
        else if (log_level == "debug") g_log = LogLevel::kDebug;

        if (sweep_run->parsed()) return cmd_sweep_run(config_path, sweep_store, jobs, seed_offset);
        if (measure_compute->parsed())
            return cmd_measure_compute(measure_store, only, recompute, jobs);
        if (stats->parsed()) return cmd_stats(stats_store, targets_csv, out_dir);
        if (plot->parsed()) return cmd_plot(plot_dir);
        throw Error("no command given");
    } catch (const std::exception& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 1;
    }
}
