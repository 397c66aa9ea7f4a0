#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evodyn/engine.hpp"
#include "evodyn/intervals.hpp"
#include "evodyn/scheme_spec.hpp"
#include "evodyn/stats.hpp"

namespace evodyn::harness {

using nlohmann::json;

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double spec_c(const json& j) { return j.is_object() ? j.value("c", 1.0) : 1.0; }

}  // namespace detail

/// Shifting-rate grid entry: an absolute value or a formula token evaluated
/// per n with base-2 logs. Tokens: c*log(n)/n^2, c*log(n)/n, 1/(5n), c/n,
/// c*log(n)^2/n^2, c*log(n)^2/n, min(c*log(n)^2/n,1/2).
inline double resolve_sigma(const json& spec, int n) {
    if (spec.is_number()) return spec.get<double>();
    std::string token;
    if (spec.is_string())
        token = spec.get<std::string>();
    else if (spec.is_object() && spec.contains("token"))
        token = spec.at("token").get<std::string>();
    else
        throw std::invalid_argument("sigma spec must be a number or token");
    const double c = detail::spec_c(spec);
    const double l = lg(double(n));
    const double nn = double(n);
    if (token == "c*log(n)/n^2") return c * l / (nn * nn);
    if (token == "c*log(n)/n") return c * l / nn;
    if (token == "1/(5n)") return 1.0 / (5.0 * nn);
    if (token == "c/n") return c / nn;
    if (token == "c*log(n)^2/n^2") return c * l * l / (nn * nn);
    if (token == "c*log(n)^2/n") return c * l * l / nn;
    if (token == "min(c*log(n)^2/n,1/2)") return std::min(c * l * l / nn, 0.5);
    throw std::invalid_argument("unknown sigma token '" + token + "'");
}

/// Offspring-count entry: value or token from {n^2*log(n), n, c*n}, rounded
/// to the nearest integer, at least 1.
inline int resolve_lambda(const json& spec, int n) {
    double v;
    if (spec.is_number()) {
        v = spec.get<double>();
    } else {
        std::string token;
        if (spec.is_string())
            token = spec.get<std::string>();
        else if (spec.is_object() && spec.contains("token"))
            token = spec.at("token").get<std::string>();
        else
            throw std::invalid_argument("lambda spec must be a number or token");
        const double c = detail::spec_c(spec);
        if (token == "n^2*log(n)")
            v = double(n) * double(n) * lg(double(n));
        else if (token == "n")
            v = double(n);
        else if (token == "c*n")
            v = c * double(n);
        else
            throw std::invalid_argument("unknown lambda token '" + token + "'");
    }
    return std::max(1, int(std::llround(v)));
}

/// Approximation-slack entry: value or "G/n", the ratio slack of the second
/// forbidden interval (needs the cell's resolved sigma).
inline double resolve_epsilon(const json& spec, int n, double sigma) {
    if (spec.is_number()) return spec.get<double>();
    std::string token;
    if (spec.is_string())
        token = spec.get<std::string>();
    else if (spec.is_object() && spec.contains("token"))
        token = spec.at("token").get<std::string>();
    else
        throw std::invalid_argument("epsilon spec must be a number or token");
    if (token == "G/n") return big_g_value(n, sigma) / double(n);
    throw std::invalid_argument("unknown epsilon token '" + token + "'");
}

/// Generation-cap entry: value or {"token":"n^k","k":...}, at least 1.
inline long long resolve_max_generations(const json& spec, int n) {
    double v;
    if (spec.is_number()) {
        v = spec.get<double>();
    } else if (spec.is_object() && spec.contains("token")) {
        const std::string token = spec.at("token").get<std::string>();
        if (token != "n^k") throw std::invalid_argument("unknown max_generations token");
        v = std::pow(double(n), spec.value("k", 1.0));
    } else {
        throw std::invalid_argument("max_generations spec must be a number or token");
    }
    return std::max(1ll, (long long)std::llround(v));
}

struct ExperimentSpec {
    std::string name;
    std::vector<json> n_list;
    std::vector<json> sigma_list;
    std::vector<json> lambda_list;
    std::vector<json> scheme_list;
    std::vector<json> epsilon_list;
    json max_generations_spec = json(1000000);
    long long replications = 1;
    std::uint64_t base_seed = 1;
    RunMode mode = RunMode::Count;
    bool record_intervals = false;

    static std::vector<json> as_list(const json& j) {
        if (j.is_array()) return std::vector<json>(j.begin(), j.end());
        return {j};
    }

    static ExperimentSpec from_json(const json& j) {
        ExperimentSpec s;
        s.name = j.at("name").get<std::string>();
        s.n_list = as_list(j.at("n"));
        s.sigma_list = as_list(j.at("sigma"));
        s.lambda_list = as_list(j.value("lambda", json(1)));
        s.scheme_list = as_list(j.at("scheme"));
        s.epsilon_list = as_list(j.value("epsilon", json(0.0)));
        s.max_generations_spec = j.value("max_generations", json(1000000));
        s.replications = j.value("replications", 1ll);
        s.base_seed = j.value("base_seed", std::uint64_t(1));
        s.mode = j.value("mode", std::string("count")) == "genome" ? RunMode::Genome
                                                                   : RunMode::Count;
        s.record_intervals = j.value("record_intervals", false);
        if (s.replications < 1) throw std::invalid_argument("replications must be at least 1");
        return s;
    }

    json to_json() const {
        json j;
        j["name"] = name;
        j["n"] = n_list;
        j["sigma"] = sigma_list;
        j["lambda"] = lambda_list;
        j["scheme"] = scheme_list;
        j["epsilon"] = epsilon_list;
        j["max_generations"] = max_generations_spec;
        j["replications"] = replications;
        j["base_seed"] = base_seed;
        j["mode"] = mode == RunMode::Genome ? "genome" : "count";
        j["record_intervals"] = record_intervals;
        return j;
    }
};

/// One resolved grid cell; the contained RunConfig carries the cell seed,
/// and replications fill in the replication index.
struct Cell {
    std::size_t index = 0;
    int n = 0;
    double sigma = 0.0;
    int lambda = 1;
    double epsilon = 0.0;
    std::string scheme_label;
    RunConfig config;
};

inline std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t cell_index) {
    return evodyn::detail::key_chain(evodyn::detail::sm_mix(base_seed ^ 0xce11ce11u),
                                     std::uint64_t(cell_index));
}

/// Cartesian grid expansion. Pure function of the spec; throws with the
/// offending cell identity on any invalid resolution.
inline std::vector<Cell> resolve(const ExperimentSpec& spec) {
    std::vector<Cell> cells;
    std::size_t index = 0;
    for (const json& nj : spec.n_list)
        for (const json& sj : spec.sigma_list)
            for (const json& lj : spec.lambda_list)
                for (const json& cj : spec.scheme_list)
                    for (const json& ej : spec.epsilon_list) {
                        const int n = nj.get<int>();
                        try {
                            Cell cell;
                            cell.index = index;
                            cell.n = n;
                            cell.sigma = resolve_sigma(sj, n);
                            validate_shift_rate(cell.sigma);
                            cell.lambda = resolve_lambda(lj, n);
                            cell.epsilon = resolve_epsilon(ej, n, cell.sigma);

                            RunConfig cfg;
                            cfg.n = n;
                            cfg.lambda = cell.lambda;
                            cfg.scheme = scheme_from_json(cj, n);
                            cfg.schedule = ShiftSchedule::fixed(cell.sigma);
                            cfg.max_generations =
                                resolve_max_generations(spec.max_generations_spec, n);
                            cfg.epsilon = cell.epsilon;
                            cfg.seed = cell_seed(spec.base_seed, index);
                            cfg.mode = spec.mode;
                            cfg.record_intervals = spec.record_intervals;
                            validate_config(cfg);

                            cell.scheme_label = scheme_family_label(cj);
                            cell.config = std::move(cfg);
                            cells.push_back(std::move(cell));
                        } catch (const std::exception& e) {
                            throw std::invalid_argument("cell " + std::to_string(index) +
                                                        " (n=" + std::to_string(n) +
                                                        "): " + e.what());
                        }
                        ++index;
                    }
    if (cells.empty()) throw std::invalid_argument("experiment grid is empty");
    return cells;
}

using CellResults = std::vector<RunRecord>;

/// Run every replication of one cell. Replications are independent; worker
/// threads pull indices from a shared counter and write into their own slot,
/// so results are identical for any parallelism level.
inline CellResults execute_cell(const Cell& cell, long long replications, int parallelism) {
    CellResults results(static_cast<std::size_t>(replications));
    const int workers = std::max(1, std::min<int>(parallelism, int(replications)));
    if (workers == 1) {
        for (long long r = 0; r < replications; ++r) {
            RunConfig cfg = cell.config;
            cfg.replication = std::uint64_t(r);
            results[std::size_t(r)] = run(cfg);
        }
        return results;
    }
    std::atomic<long long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const long long r = next.fetch_add(1);
                if (r >= replications) return;
                RunConfig cfg = cell.config;
                cfg.replication = std::uint64_t(r);
                results[std::size_t(r)] = run(cfg);
            }
        });
    for (auto& t : pool) t.join();
    return results;
}

inline std::vector<CellResults> execute(
    const std::vector<Cell>& cells, long long replications, int parallelism,
    const std::function<void(const Cell&, const CellResults&)>& on_cell_done = {}) {
    if (cells.empty()) throw std::invalid_argument("execute: no cells");
    std::vector<CellResults> all;
    all.reserve(cells.size());
    for (const Cell& cell : cells) {
        all.push_back(execute_cell(cell, replications, parallelism));
        if (on_cell_done) on_cell_done(cell, all.back());
    }
    return all;
}

struct Aggregate {
    std::string experiment;
    int n = 0;
    double sigma = 0.0;
    int lambda = 1;
    std::string scheme;
    double epsilon = 0.0;

    long long runs = 0;
    long long hits = 0;
    double censor_fraction = 0.0;
    double censor_lo95 = 0.0;
    double censor_hi95 = 0.0;
    // conditional on uncensored runs; NaN when no run hit
    double mean_tau = std::numeric_limits<double>::quiet_NaN();
    double se_tau = std::numeric_limits<double>::quiet_NaN();
    double ci95_half_tau = std::numeric_limits<double>::quiet_NaN();
    double median_tau = std::numeric_limits<double>::quiet_NaN();
    double mean_evaluations = 0.0;
    long long eps_hits = 0;
    double eps_censor_fraction = 0.0;
    double mean_eps_tau = std::numeric_limits<double>::quiet_NaN();
    double mean_final_matching = 0.0;
    // share of runs whose generation-0 state fell in the open interval O1;
    // NaN when interval labels were off or degenerate
    double initial_open_fraction = std::numeric_limits<double>::quiet_NaN();
};

inline Aggregate aggregate_cell(const std::string& experiment, const Cell& cell,
                                const CellResults& results) {
    Aggregate a;
    a.experiment = experiment;
    a.n = cell.n;
    a.sigma = cell.sigma;
    a.lambda = cell.lambda;
    a.scheme = cell.scheme_label;
    a.epsilon = cell.epsilon;
    a.runs = (long long)results.size();

    std::vector<double> taus, eps_taus;
    double eval_sum = 0.0, final_sum = 0.0;
    long long labeled = 0, open_start = 0;
    for (const RunRecord& r : results) {
        if (!r.censored) {
            ++a.hits;
            taus.push_back(double(r.hit_generation));
        }
        if (!r.eps_censored) {
            ++a.eps_hits;
            eps_taus.push_back(double(r.eps_hit_generation));
        }
        eval_sum += double(r.evaluations);
        final_sum += double(r.final_matching);
        if (r.has_interval_labels) {
            ++labeled;
            if (r.initial_first_level == FirstLevel::Open1) ++open_start;
        }
    }
    a.censor_fraction = double(a.runs - a.hits) / double(a.runs);
    const auto ci = clopper_pearson(a.runs - a.hits, a.runs, 0.95);
    a.censor_lo95 = ci.first;
    a.censor_hi95 = ci.second;
    if (!taus.empty()) {
        const MeanSE m = mean_se(taus);
        a.mean_tau = m.mean;
        a.se_tau = m.se;
        a.ci95_half_tau = normal_quantile(0.975) * m.se;
        a.median_tau = median_of(taus);
    }
    a.mean_evaluations = eval_sum / double(a.runs);
    a.eps_censor_fraction = double(a.runs - a.eps_hits) / double(a.runs);
    if (!eps_taus.empty()) a.mean_eps_tau = mean_se(eps_taus).mean;
    a.mean_final_matching = final_sum / double(a.runs);
    if (labeled > 0) a.initial_open_fraction = double(open_start) / double(labeled);
    return a;
}

inline constexpr const char* kResultsHeader =
    "experiment,n,sigma,lambda,scheme,epsilon,replication,seed,hit_generation,"
    "censored,eps_hit_generation,eps_censored,evaluations,final_matching";

/// One results row per run. Censored runs carry the executed generation
/// count as the lower-bound hitting time with censored=1.
inline void write_results_rows(std::ostream& os, const std::string& experiment, const Cell& cell,
                               const CellResults& results) {
    for (std::size_t r = 0; r < results.size(); ++r) {
        const RunRecord& rec = results[r];
        const long long tau = rec.censored ? rec.generations : rec.hit_generation;
        const long long eps_tau = rec.eps_censored ? rec.generations : rec.eps_hit_generation;
        os << experiment << ',' << cell.n << ',' << detail::fmt(cell.sigma) << ','
           << cell.lambda << ',' << cell.scheme_label << ',' << detail::fmt(cell.epsilon) << ','
           << r << ',' << cell.config.seed << ',' << tau << ',' << (rec.censored ? 1 : 0) << ','
           << eps_tau << ',' << (rec.eps_censored ? 1 : 0) << ',' << rec.evaluations << ','
           << rec.final_matching << '\n';
    }
}

inline constexpr const char* kAggregatesHeader =
    "experiment,n,sigma,lambda,scheme,epsilon,runs,hits,censor_fraction,censor_lo95,"
    "censor_hi95,mean_tau,se_tau,ci95_half_tau,median_tau,mean_evaluations,eps_hits,"
    "eps_censor_fraction,mean_eps_tau,mean_final_matching,initial_open_fraction";

inline void write_aggregate_row(std::ostream& os, const Aggregate& a) {
    using detail::fmt;
    os << a.experiment << ',' << a.n << ',' << fmt(a.sigma) << ',' << a.lambda << ','
       << a.scheme << ',' << fmt(a.epsilon) << ',' << a.runs << ',' << a.hits << ','
       << fmt(a.censor_fraction) << ',' << fmt(a.censor_lo95) << ',' << fmt(a.censor_hi95)
       << ',' << fmt(a.mean_tau) << ',' << fmt(a.se_tau) << ',' << fmt(a.ci95_half_tau) << ','
       << fmt(a.median_tau) << ',' << fmt(a.mean_evaluations) << ',' << a.eps_hits << ','
       << fmt(a.eps_censor_fraction)
       << ',' << fmt(a.mean_eps_tau) << ',' << fmt(a.mean_final_matching) << ','
       << fmt(a.initial_open_fraction) << '\n';
}

inline json aggregate_to_json(const Aggregate& a) {
    json j;
    j["experiment"] = a.experiment;
    j["n"] = a.n;
    j["sigma"] = a.sigma;
    j["lambda"] = a.lambda;
    j["scheme"] = a.scheme;
    j["epsilon"] = a.epsilon;
    j["runs"] = a.runs;
    j["hits"] = a.hits;
    j["censor_fraction"] = a.censor_fraction;
    j["censor_lo95"] = a.censor_lo95;
    j["censor_hi95"] = a.censor_hi95;
    if (std::isfinite(a.mean_tau)) {
        j["mean_tau"] = a.mean_tau;
        j["se_tau"] = a.se_tau;
        j["ci95_half_tau"] = a.ci95_half_tau;
        j["median_tau"] = a.median_tau;
    } else {
        j["mean_tau"] = nullptr;
        j["se_tau"] = nullptr;
        j["ci95_half_tau"] = nullptr;
        j["median_tau"] = nullptr;
    }
    j["mean_evaluations"] = a.mean_evaluations;
    j["eps_hits"] = a.eps_hits;
    j["eps_censor_fraction"] = a.eps_censor_fraction;
    j["mean_eps_tau"] = std::isfinite(a.mean_eps_tau) ? json(a.mean_eps_tau) : json(nullptr);
    j["mean_final_matching"] = a.mean_final_matching;
    j["initial_open_fraction"] =
        std::isfinite(a.initial_open_fraction) ? json(a.initial_open_fraction) : json(nullptr);
    return j;
}

/// Crash-safe rewrite: write to a sibling temp file, then rename over the
/// target.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << contents;
    }
    std::filesystem::rename(tmp, path);
}

/// Built-in regime presets reproducing the shifting-rate phase table at desk
/// scale. Names: droste-easy, one-one-hard, one-lambda-easy, one-lambda-hard.
inline ExperimentSpec regime_scan(const std::string& preset) {
    json j;
    if (preset == "droste-easy") {
        // (1+1), fixed 1/n, sigma = log2(n)/(5 n^2): the polynomial regime.
        j["name"] = preset;
        j["n"] = {16, 32, 64, 128};
        j["sigma"] = {{"token", "c*log(n)/n^2"}, {"c", 0.2}};
        j["lambda"] = 1;
        j["scheme"] = {{"kind", "fixed"}, {"p", "1/n"}};
        j["epsilon"] = 0.0;
        j["replications"] = 200;
        j["max_generations"] = 1000000;
        j["base_seed"] = 118999;
    } else if (preset == "one-one-hard") {
        // sigma = log2(n)^2/n^2, super-polynomial regime for the (1+1) EA;
        // epsilon tracks the 1 - G/n approximation threshold.
        j["name"] = preset;
        j["n"] = {64, 128, 256};
        j["sigma"] = {{"token", "c*log(n)^2/n^2"}, {"c", 1.0}};
        j["lambda"] = 1;
        j["scheme"] = json::array(
            {{{"kind", "fixed"}, {"p", "1/n"}},
             {{"kind", "banded"}, {"lo", "1/n"}, {"hi", "log(n)/n"}, {"policy", "cycle"}},
             {{"kind", "oracle_greedy"},
              {"menu", {"1/n", "2/n", "4/n", "8/n", 0.25, 0.5, 1.0}}}});
        j["epsilon"] = "G/n";
        j["replications"] = 100;
        j["max_generations"] = {{"token", "n^k"}, {"k", 3}};
        j["base_seed"] = 881199;
        j["record_intervals"] = true;
    } else if (preset == "one-lambda-easy") {
        // n=16, lambda = n^2 log2(n) = 1024, banded [1/16, 1/4], sigma=1/80:
        // the drift regime with mean tau below 8n/5.
        j["name"] = preset;
        j["n"] = 16;
        j["sigma"] = "1/(5n)";
        j["lambda"] = {{"token", "n^2*log(n)"}};
        j["scheme"] = {{"kind", "banded"}, {"lo", "1/n"}, {"hi", "log(n)/n"}, {"policy", "cycle"}};
        j["epsilon"] = 0.0;
        j["replications"] = 1000;
        j["max_generations"] = 20000;
        j["base_seed"] = 511616;
    } else if (preset == "one-lambda-hard") {
        // sigma = log2(n)^2/n (clamped into (0,1/2]); super-polynomial regime
        // for the (1+lambda) EA even with an uncapped oracle menu.
        j["name"] = preset;
        j["n"] = {64, 128};
        j["sigma"] = {{"token", "min(c*log(n)^2/n,1/2)"}, {"c", 1.0}};
        j["lambda"] = {{"token", "n"}};
        j["scheme"] = json::array(
            {{{"kind", "banded"}, {"lo", "1/n"}, {"hi", "log(n)/n"}, {"policy", "cycle"}},
             {{"kind", "oracle_greedy"},
              {"menu", {"1/n", "4/n", "16/n", 0.25, 0.5, 0.75, 1.0}}}});
        j["epsilon"] = 0.0;
        j["replications"] = 50;
        j["max_generations"] = {{"token", "n^k"}, {"k", 3}};
        j["base_seed"] = 641128;
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "'");
    }
    return ExperimentSpec::from_json(j);
}

}  // namespace evodyn::harness
