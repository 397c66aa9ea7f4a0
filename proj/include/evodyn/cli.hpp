#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evodyn/drift.hpp"
#include "evodyn/engine.hpp"
#include "evodyn/harness.hpp"
#include "evodyn/hitting.hpp"
#include "evodyn/intervals.hpp"
#include "evodyn/scheme_spec.hpp"

namespace evodyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

inline std::vector<double> parse_rate_list(const std::string& text, int n) {
    std::vector<double> rates;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string part =
            comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
        if (!part.empty()) rates.push_back(parse_rate_expr(part, n));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (rates.empty()) throw std::invalid_argument("empty rate list");
    return rates;
}

inline std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stoi(part));
    if (out.empty()) throw std::invalid_argument("empty integer list");
    return out;
}

inline json record_to_json(const RunConfig& cfg, const std::string& scheme_label,
                           double sigma, const RunRecord& rec) {
    json j;
    j["n"] = cfg.n;
    j["lambda"] = cfg.lambda;
    j["sigma"] = sigma;
    j["scheme"] = scheme_label;
    j["epsilon"] = cfg.epsilon;
    j["seed"] = cfg.seed;
    j["mode"] = cfg.mode == RunMode::Genome ? "genome" : "count";
    j["censored"] = rec.censored;
    j["hit_generation"] = rec.censored ? json(nullptr) : json(rec.hit_generation);
    j["eps_censored"] = rec.eps_censored;
    j["eps_hit_generation"] = rec.eps_censored ? json(nullptr) : json(rec.eps_hit_generation);
    j["generations"] = rec.generations;
    j["evaluations"] = rec.evaluations;
    j["initial_matching"] = rec.initial_matching;
    j["final_matching"] = rec.final_matching;
    if (rec.has_interval_labels) {
        j["initial_first_level"] = to_string(rec.initial_first_level);
        json occ;
        occ["L1"] = rec.first_level_occupancy[0];
        occ["O1"] = rec.first_level_occupancy[1];
        occ["F1"] = rec.first_level_occupancy[2];
        j["first_level_occupancy"] = occ;
        json occ2;
        const char* names[] = {"none", "F2", "A1", "A2", "L2", "B1", "B2"};
        for (int k = 0; k < 7; ++k) occ2[names[k]] = rec.second_level_occupancy[std::size_t(k)];
        j["second_level_occupancy"] = occ2;
    }
    if (!rec.best_ratio_trace.empty()) j["best_ratio_trace"] = rec.best_ratio_trace;
    return j;
}

struct AggRow {
    std::string experiment;
    int n = 0;
    double sigma = 0;
    int lambda = 0;
    std::string scheme;
    double epsilon = 0;
    long long runs = 0, hits = 0;
    double censor_fraction = 0, mean_tau = 0, se_tau = 0, median_tau = 0;
    double mean_evaluations = 0, eps_censor_fraction = 0;
    bool has_mean_tau = false;
};

inline std::vector<AggRow> read_aggregates_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot read " + path.string());
    std::vector<AggRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string part;
        while (std::getline(ss, part, ',')) f.push_back(part);
        if (f.size() < 21) throw std::runtime_error("malformed aggregates row: " + line);
        AggRow r;
        r.experiment = f[0];
        r.n = std::stoi(f[1]);
        r.sigma = std::stod(f[2]);
        r.lambda = std::stoi(f[3]);
        r.scheme = f[4];
        r.epsilon = std::stod(f[5]);
        r.runs = std::stoll(f[6]);
        r.hits = std::stoll(f[7]);
        r.censor_fraction = std::stod(f[8]);
        r.mean_tau = std::strtod(f[11].c_str(), nullptr);
        r.has_mean_tau = f[11] != "nan" && f[11] != "-nan";
        r.se_tau = std::strtod(f[12].c_str(), nullptr);
        r.median_tau = std::strtod(f[14].c_str(), nullptr);
        r.mean_evaluations = std::stod(f[15]);
        r.eps_censor_fraction = std::stod(f[17]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace detail

struct SweepOptions {
    std::string preset;
    std::string config_path;
    std::string out_dir;
    int parallelism = int(std::thread::hardware_concurrency());
    bool force = false;
    std::optional<std::uint64_t> seed_override;
};

/// resolve -> execute -> aggregate, with per-cell streaming persistence:
/// results.csv grows cell by cell, the aggregate checkpoint is rewritten
/// atomically after every cell.
inline int cmd_sweep(const SweepOptions& opt, std::ostream& out) {
    harness::ExperimentSpec spec = [&]() {
        if (!opt.preset.empty()) return harness::regime_scan(opt.preset);
        std::ifstream is(opt.config_path);
        if (!is) throw std::invalid_argument("cannot read config " + opt.config_path);
        json j = json::parse(is);
        return harness::ExperimentSpec::from_json(j);
    }();
    if (opt.seed_override) {
        spec.base_seed = *opt.seed_override;
    } else if (const char* env = std::getenv("EVODYN_SEED")) {
        spec.base_seed = std::strtoull(env, nullptr, 10);
    }

    const fs::path dir = opt.out_dir.empty() ? fs::path("results-" + spec.name)
                                             : fs::path(opt.out_dir);
    const fs::path results_path = dir / "results.csv";
    if (fs::exists(results_path) && !opt.force)
        throw std::invalid_argument(results_path.string() +
                                    " exists; pass --force to overwrite");
    fs::create_directories(dir);

    const std::vector<harness::Cell> cells = harness::resolve(spec);

    std::ofstream results(results_path, std::ios::trunc);
    if (!results) throw std::runtime_error("cannot write " + results_path.string());
    results << harness::kResultsHeader << '\n';

    std::vector<harness::Aggregate> aggregates;
    const auto checkpoint = [&]() {
        std::ostringstream csv;
        csv << harness::kAggregatesHeader << '\n';
        json mirror = json::array();
        for (const auto& a : aggregates) {
            harness::write_aggregate_row(csv, a);
            mirror.push_back(harness::aggregate_to_json(a));
        }
        harness::atomic_write(dir / "aggregates.csv", csv.str());
        harness::atomic_write(dir / "aggregates.json", mirror.dump(2) + "\n");
    };

    harness::execute(cells, spec.replications, std::max(1, opt.parallelism),
                     [&](const harness::Cell& cell, const harness::CellResults& res) {
                         harness::write_results_rows(results, spec.name, cell, res);
                         results.flush();
                         aggregates.push_back(harness::aggregate_cell(spec.name, cell, res));
                         checkpoint();
                         const auto& a = aggregates.back();
                         out << spec.name << " n=" << a.n << " sigma=" << a.sigma
                             << " lambda=" << a.lambda << " scheme=" << a.scheme
                             << " mean_generations="
                             << (a.hits ? std::to_string(a.mean_tau) : std::string("-"))
                             << " mean_evaluations=" << a.mean_evaluations
                             << " censor_fraction=" << a.censor_fraction << '\n';
                     });

    harness::atomic_write(dir / "spec.json", spec.to_json().dump(2) + "\n");
    out << "wrote " << results_path.string() << ", aggregates.csv, aggregates.json\n";
    return 0;
}

inline int cmd_report(const std::string& results_dir, std::ostream& out) {
    const fs::path dir(results_dir);
    const fs::path agg_path = dir / "aggregates.csv";
    if (!fs::exists(agg_path))
        throw std::invalid_argument("no aggregates.csv under " + results_dir);
    const auto rows = detail::read_aggregates_csv(agg_path);
    if (rows.empty()) throw std::invalid_argument("aggregates.csv is empty");

    // Long-format plot data: one row per (series, x, metric).
    std::ostringstream long_csv;
    long_csv << "experiment,scheme,x_name,x,metric,value\n";
    const auto emit = [&](const detail::AggRow& r, const char* x_name, double x) {
        const auto row = [&](const char* metric, double v, bool available = true) {
            if (!available) return;
            long_csv << r.experiment << ',' << r.scheme << ',' << x_name << ','
                     << harness::detail::fmt(x) << ',' << metric << ','
                     << harness::detail::fmt(v) << '\n';
        };
        row("mean_tau", r.mean_tau, r.has_mean_tau);
        row("censor_fraction", r.censor_fraction);
        row("eps_censor_fraction", r.eps_censor_fraction);
        row("mean_evaluations", r.mean_evaluations);
    };

    std::map<std::pair<std::string, std::string>, std::vector<const detail::AggRow*>> by_series;
    for (const auto& r : rows) by_series[{r.experiment, r.scheme}].push_back(&r);

    for (const auto& [key, series] : by_series) {
        std::set<int> ns;
        std::set<double> sigmas;
        for (const auto* r : series) {
            ns.insert(r->n);
            sigmas.insert(r->sigma);
        }
        for (const auto* r : series) {
            if (ns.size() > 1) emit(*r, "n", double(r->n));
            if (sigmas.size() > 1 && ns.size() <= 1) emit(*r, "sigma", r->sigma);
            if (ns.size() <= 1 && sigmas.size() <= 1) emit(*r, "n", double(r->n));
        }
    }
    harness::atomic_write(dir / "report_long.csv", long_csv.str());

    // Plain-text regime summary with log-log slopes where a scaling
    // relationship is observable.
    std::ostringstream txt;
    char buf[256];
    txt << "regime summary\n==============\n";
    for (const auto& [key, series] : by_series) {
        txt << "\n" << key.first << " / " << key.second << "\n";
        std::snprintf(buf, sizeof(buf), "  %8s %12s %8s %12s %12s %10s\n", "n", "sigma",
                      "lambda", "mean_tau", "censor", "eps_censor");
        txt << buf;
        std::vector<double> fit_n, fit_tau;
        for (const auto* r : series) {
            std::snprintf(buf, sizeof(buf), "  %8d %12.4g %8d %12s %12.3f %10.3f\n", r->n,
                          r->sigma, r->lambda,
                          r->has_mean_tau ? std::to_string(r->mean_tau).c_str() : "-",
                          r->censor_fraction, r->eps_censor_fraction);
            txt << buf;
            if (r->has_mean_tau && r->mean_tau > 0) {
                fit_n.push_back(double(r->n));
                fit_tau.push_back(r->mean_tau);
            }
        }
        if (std::set<double>(fit_n.begin(), fit_n.end()).size() >= 2) {
            const LogLogFit f = loglog_fit(fit_n, fit_tau);
            std::snprintf(buf, sizeof(buf), "  log-log slope of mean_tau vs n: %.3f\n", f.slope);
            txt << buf;
        }
    }
    harness::atomic_write(dir / "regime_summary.txt", txt.str());
    out << txt.str();
    out << "\nwrote report_long.csv, regime_summary.txt under " << dir.string() << "\n";
    return 0;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"simulation lab and exact analysis for evolutionary dynamic optimization"};
    app.require_subcommand(1);

    // ---- run ----
    auto* c_run = app.add_subcommand("run", "execute one run, print the record as JSON");
    int run_n = 16;
    double run_sigma = 0.0125;
    int run_lambda = 1;
    std::string run_scheme = "fixed:1/n";
    std::uint64_t run_seed = 1;
    long long run_maxgen = 1000000;
    double run_eps = 0.0;
    std::string run_mode = "count";
    bool run_intervals = false, run_ratio_trace = false;
    c_run->add_option("--n", run_n, "problem size")->required();
    c_run->add_option("--sigma", run_sigma, "shifting rate in (0, 1/2]")->required();
    c_run->add_option("--lambda", run_lambda, "offspring count");
    c_run->add_option("--scheme", run_scheme, "mutation scheme, kind:args");
    c_run->add_option("--seed", run_seed, "run seed");
    c_run->add_option("--max-generations", run_maxgen, "censoring cap");
    c_run->add_option("--epsilon", run_eps, "approximation slack in [0,1)");
    c_run->add_option("--mode", run_mode, "count|genome")
        ->check(CLI::IsMember({"count", "genome"}));
    c_run->add_flag("--intervals", run_intervals, "record interval occupancy");
    c_run->add_flag("--ratio-trace", run_ratio_trace, "record per-generation best ratio");

    // ---- sweep ----
    auto* c_sweep = app.add_subcommand("sweep", "config-driven experiment grid");
    SweepOptions sweep;
    c_sweep->add_option("--preset", sweep.preset,
                        "droste-easy|one-one-hard|one-lambda-easy|one-lambda-hard");
    c_sweep->add_option("--config", sweep.config_path, "experiment spec JSON");
    c_sweep->add_option("--out", sweep.out_dir, "output directory");
    c_sweep->add_option("--parallelism", sweep.parallelism, "worker threads");
    c_sweep->add_flag("--force", sweep.force, "overwrite existing results");
    std::uint64_t sweep_seed = 0;
    auto* sweep_seed_opt = c_sweep->add_option("--seed", sweep_seed, "override base seed");

    // ---- exact ----
    auto* c_exact = app.add_subcommand("exact", "absorbing-chain expected hitting times");
    int ex_n = 8;
    double ex_sigma = 0.01;
    std::string ex_rates = "1/n";
    int ex_lambda = 0;
    bool ex_offspring_only = false;
    std::string ex_kernel_csv;
    c_exact->add_option("--n", ex_n, "problem size (<= 64)")->required();
    c_exact->add_option("--sigma", ex_sigma, "shifting rate")->required();
    c_exact->add_option("--rates", ex_rates, "per-offspring mutation rates, comma separated");
    c_exact->add_option("--lambda", ex_lambda, "replicate a single rate lambda times");
    c_exact->add_flag("--offspring-only", ex_offspring_only,
                      "count only offspring hits as absorption");
    c_exact->add_option("--kernel-csv", ex_kernel_csv, "dump the composed kernel as CSV");

    // ---- drift ----
    auto* c_drift = app.add_subcommand("drift", "one-step mean drift estimates");
    int dr_n = 16;
    double dr_sigma = 0.0125;
    std::string dr_rates = "1/n";
    int dr_lambda = 0;
    std::string dr_states;
    long long dr_samples = 10000;
    std::uint64_t dr_seed = 1;
    bool dr_exact = false;
    c_drift->add_option("--n", dr_n, "problem size")->required();
    c_drift->add_option("--sigma", dr_sigma, "shifting rate")->required();
    c_drift->add_option("--rates", dr_rates, "per-offspring rates");
    c_drift->add_option("--lambda", dr_lambda, "replicate a single rate lambda times");
    c_drift->add_option("--states", dr_states, "states to probe, comma separated")->required();
    c_drift->add_option("--samples", dr_samples, "Monte Carlo samples per state");
    c_drift->add_option("--seed", dr_seed, "sampling seed");
    c_drift->add_flag("--exact", dr_exact, "also print the exact kernel drift");

    // ---- decompose ----
    auto* c_dec = app.add_subcommand("decompose", "interval decomposition bounds");
    int de_n = 1024;
    double de_sigma = 0.001;
    c_dec->add_option("--n", de_n, "problem size")->required();
    c_dec->add_option("--sigma", de_sigma, "shifting rate")->required();

    // ---- report ----
    auto* c_report = app.add_subcommand("report", "plot-ready CSV and text summary");
    std::string rp_dir;
    c_report->add_option("--results", rp_dir, "sweep output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*c_run) {
            validate_shift_rate(run_sigma);
            RunConfig cfg;
            cfg.n = run_n;
            cfg.lambda = run_lambda;
            cfg.scheme = scheme_from_inline(run_scheme, run_n);
            cfg.schedule = ShiftSchedule::fixed(run_sigma);
            cfg.max_generations = run_maxgen;
            cfg.epsilon = run_eps;
            cfg.seed = run_seed;
            cfg.mode = run_mode == "genome" ? RunMode::Genome : RunMode::Count;
            cfg.record_intervals = run_intervals;
            cfg.record_best_ratio = run_ratio_trace;
            validate_config(cfg);
            const RunRecord rec = run(cfg);
            out << detail::record_to_json(cfg, cfg.scheme->name(), run_sigma, rec).dump(2)
                << '\n';
            return 0;
        }
        if (*c_sweep) {
            if (sweep.preset.empty() == sweep.config_path.empty())
                throw std::invalid_argument("pass exactly one of --preset or --config");
            if (!sweep_seed_opt->empty()) sweep.seed_override = sweep_seed;
            return cmd_sweep(sweep, out);
        }
        if (*c_exact) {
            std::vector<double> rates = detail::parse_rate_list(ex_rates, ex_n);
            if (ex_lambda > 0) {
                if (rates.size() != 1)
                    throw std::invalid_argument("--lambda replication needs a single rate");
                rates.assign(std::size_t(ex_lambda), rates.front());
            }
            validate_shift_rate(ex_sigma);
            const FhtResult r =
                exact_mean_fht(ex_n, ex_sigma, rates, !ex_offspring_only);
            char buf[64];
            for (int i = 0; i <= ex_n; ++i) {
                std::snprintf(buf, sizeof(buf), "state %3d  mean_tau %.6g", i,
                              r.per_state[std::size_t(i)]);
                out << buf << '\n';
            }
            std::snprintf(buf, sizeof(buf), "overall    mean_tau %.6g", r.overall);
            out << buf << '\n';
            if (!ex_kernel_csv.empty()) {
                std::ofstream os(ex_kernel_csv, std::ios::trunc);
                if (!os) throw std::runtime_error("cannot write " + ex_kernel_csv);
                composed_step_kernel(ex_n, ex_sigma, rates, /*absorbing=*/true).write_csv(os);
            }
            return 0;
        }
        if (*c_drift) {
            std::vector<double> rates = detail::parse_rate_list(dr_rates, dr_n);
            if (dr_lambda > 0) {
                if (rates.size() == 1) rates.assign(std::size_t(dr_lambda), rates.front());
                else if (int(rates.size()) != dr_lambda)
                    throw std::invalid_argument("--lambda disagrees with the rate list length");
            }
            const std::vector<int> states = detail::parse_int_list(dr_states);
            const auto est = estimate_drift(dr_n, dr_sigma, rates, states, dr_samples, dr_seed);
            std::vector<double> exact;
            if (dr_exact) exact = exact_drift(dr_n, dr_sigma, rates, states);
            char buf[160];
            for (std::size_t i = 0; i < est.size(); ++i) {
                if (dr_exact)
                    std::snprintf(buf, sizeof(buf),
                                  "state %3d  drift %.6g  se %.3g  exact %.6g", est[i].state,
                                  est[i].mean, est[i].std_error, exact[i]);
                else
                    std::snprintf(buf, sizeof(buf), "state %3d  drift %.6g  se %.3g",
                                  est[i].state, est[i].mean, est[i].std_error);
                out << buf << '\n';
            }
            return 0;
        }
        if (*c_dec) {
            const IntervalDecomposition d = decompose(de_n, de_sigma);
            json j;
            j["n"] = d.n;
            j["sigma"] = d.sigma;
            j["gamma"] = d.gamma;
            j["G"] = d.G;
            j["F1"] = {d.f1_lo, double(d.n)};
            j["L1"] = {0.0, d.l1_hi};
            j["F2"] = {double(d.n) - d.G, double(d.n)};
            j["A1"] = {double(d.n) - 2 * d.G, double(d.n) - d.G};
            j["A2"] = {double(d.n) - 3 * d.G, double(d.n) - 2 * d.G};
            j["L2"] = {0.0, 4 * d.G};
            j["B1"] = {4 * d.G, 5 * d.G};
            j["B2"] = {5 * d.G, 6 * d.G};
            out << j.dump(2) << '\n';
            return 0;
        }
        if (*c_report) return cmd_report(rp_dir, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << "error: no subcommand\n";
    return 2;
}

}  // namespace evodyn::cli
