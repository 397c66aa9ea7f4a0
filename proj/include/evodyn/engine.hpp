#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "evodyn/genome.hpp"
#include "evodyn/intervals.hpp"
#include "evodyn/kernels.hpp"
#include "evodyn/problem.hpp"
#include "evodyn/random.hpp"
#include "evodyn/schemes.hpp"

namespace evodyn {

enum class RunMode { Genome, Count };

struct RunConfig {
    int n = 0;
    int lambda = 1;
    SchemePtr scheme;
    ShiftSchedule schedule = ShiftSchedule::fixed(0.5);
    long long max_generations = 0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;
    RunMode mode = RunMode::Count;
    bool record_intervals = false;
    bool record_best_ratio = false;
};

inline void validate_config(const RunConfig& cfg) {
    if (cfg.n <= 0) throw std::invalid_argument("n must be positive");
    if (cfg.lambda < 1) throw std::invalid_argument("lambda must be at least 1");
    if (!cfg.scheme) throw std::invalid_argument("scheme missing");
    if (cfg.max_generations < 1) throw std::invalid_argument("max_generations must be at least 1");
    if (cfg.epsilon < 0.0 || cfg.epsilon >= 1.0)
        throw std::invalid_argument("epsilon outside [0,1)");
}

/// Role streams of one run. Every stochastic decision at generation t pulls
/// from its own (seed, replication, t, role) stream. The (seed, replication)
/// prefix and the current generation key are memoized; derivation sits on
/// the per-offspring hot path.
struct StreamFactory {
    StreamFactory(std::uint64_t seed, std::uint64_t replication)
        : prefix_(detail::key_chain(detail::sm_mix(seed ^ 0x8f1bbcdcbfa53e0bULL), replication)) {}

    RandomStream init() const { return RandomStream(role_key(0, StreamRole::Init, 0)); }
    RandomStream shift(long long t) const {
        return RandomStream(role_key(t, StreamRole::Shift, 0));
    }
    RandomStream mutation(long long t, int chi) const {
        return RandomStream(role_key(t, StreamRole::Mutation, std::uint64_t(chi)));
    }

private:
    std::uint64_t role_key(long long t, StreamRole role, std::uint64_t chi) const {
        if (t != memo_t_) {
            memo_t_ = t;
            memo_key_ = detail::key_chain(prefix_, std::uint64_t(t));
        }
        return detail::key_chain(memo_key_,
                                 (static_cast<std::uint64_t>(role) << 32) | chi);
    }

    std::uint64_t prefix_;
    mutable long long memo_t_ = -1;
    mutable std::uint64_t memo_key_ = 0;
};

struct StepReport {
    long long t = 0;
    int parent_matching = 0;          // N_t^(P), after the phase shift
    int best_offspring_matching = 0;  // N_t^(O)
    int selected_matching = 0;        // N_t
    bool hit = false;                 // parent or some offspring equals the optimum
    bool offspring_selected = false;
};

struct RunRecord {
    bool censored = true;
    long long hit_generation = -1;
    bool eps_censored = true;
    long long eps_hit_generation = -1;
    long long generations = 0;
    long long evaluations = 0;
    int initial_matching = 0;  // matching of the initial individual
    int final_matching = 0;    // matching of the selected individual at stop
    bool has_interval_labels = false;
    FirstLevel initial_first_level = FirstLevel::Open1;
    std::array<long long, 3> first_level_occupancy{};   // indexed by FirstLevel
    std::array<long long, 7> second_level_occupancy{};  // indexed by SecondLevel
    std::vector<double> best_ratio_trace;               // only when requested
};

using FitnessFn = std::function<double(const Genome& x, const Genome& optimum)>;

namespace detail {

/// Smallest matching count whose fitness ratio reaches 1 - eps.
inline int eps_threshold_count(int n, double eps) {
    if (eps <= 0.0) return n;
    const double t = double(n) * (1.0 - eps);
    return std::max(0, int(std::ceil(t - 1e-9)));
}

}  // namespace detail

/// One generation of the (1+lambda) EA in genome space, per the algorithm:
/// shift the optimum (except at t=0), generate lambda offspring from the
/// shifted-phase parent, evaluate all under f_t, select the best offspring
/// when its fitness is at least the parent's (ties among offspring go to the
/// lowest index). The default fitness is n minus the Hamming distance.
inline StepReport step_one_plus_lambda(Genome& parent, ProblemState& state,
                                       const MutationScheme& scheme, int lambda,
                                       const StreamFactory& streams, long long t,
                                       ConditionContext& ctx,
                                       const FitnessFn& fitness = {}) {
    const int n = parent.size();
    if (t > 0) {
        if (state.phase != t - 1)
            throw std::logic_error("step: state.phase inconsistent with generation index");
        RandomStream g = streams.shift(t);
        advance_phase(state, g);
    }

    const auto eval = [&](const Genome& x) {
        return fitness ? fitness(x, state.optimum)
                       : double(n - hamming(x, state.optimum));
    };

    const int parent_matching = n - hamming(parent, state.optimum);
    const double parent_fit = eval(parent);

    ctx.n = n;
    ctx.t = t;
    ctx.lambda = lambda;
    ctx.parent_fitness = parent_fit;
    ctx.oracle_matching =
        scheme.is_oracle() ? std::optional<int>(parent_matching) : std::nullopt;

    Genome best = parent;
    double best_fit = 0.0;
    int best_matching = -1;
    bool have_best = false;
    bool any_offspring_hit = false;

    for (int chi = 1; chi <= lambda; ++chi) {
        RandomStream g = streams.mutation(t, chi);
        const double p = scheme.rate(n, t, chi, ctx, g);
        Genome child = parent;
        child.flip_each(p, g);
        const double f = eval(child);
        const int m = n - hamming(child, state.optimum);
        if (m == n) any_offspring_hit = true;
        if (!have_best || f > best_fit) {
            have_best = true;
            best = std::move(child);
            best_fit = f;
            best_matching = m;
        }
    }

    StepReport rep;
    rep.t = t;
    rep.parent_matching = parent_matching;
    rep.best_offspring_matching = best_matching;
    rep.hit = (parent_matching == n) || any_offspring_hit;
    rep.offspring_selected = best_fit >= parent_fit;
    if (rep.offspring_selected) {
        parent = std::move(best);
        rep.selected_matching = best_matching;
    } else {
        rep.selected_matching = parent_matching;
    }
    return rep;
}

inline StepReport step_one_plus_one(Genome& parent, ProblemState& state,
                                    const MutationScheme& scheme, const StreamFactory& streams,
                                    long long t, ConditionContext& ctx,
                                    const FitnessFn& fitness = {}) {
    return step_one_plus_lambda(parent, state, scheme, 1, streams, t, ctx, fitness);
}

/// Count-space stepper for BitMatching_D. Valid because the fitness depends
/// only on the matching count, which makes the selected-max process Markov
/// over [0, n]. Optimum shifts draw the lost/gained bit counts as binomials;
/// offspring counts are sampled straight from the mutate-kernel row, the
/// same conditional distribution in one inverse-CDF draw. Tables persist
/// across generations.
class CountStepper {
public:
    explicit CountStepper(int n) : n_(n), shift_tables_(n) {}

    StepReport step(CountState& parent, double sigma_t, const MutationScheme& scheme, int lambda,
                    const StreamFactory& streams, long long t, ConditionContext& ctx) {
        const int n = n_;
        int j = parent.matching;
        if (t > 0) {
            RandomStream g = streams.shift(t);
            const BinomialTable& st = shift_tables_.table(sigma_t);
            j = j - st.draw(j, g) + st.draw(n - j, g);
        }

        ctx.n = n;
        ctx.t = t;
        ctx.lambda = lambda;
        ctx.parent_fitness = double(j);
        ctx.oracle_matching = scheme.is_oracle() ? std::optional<int>(j) : std::nullopt;

        int best = -1;
        for (int chi = 1; chi <= lambda; ++chi) {
            RandomStream g = streams.mutation(t, chi);
            const double p = scheme.rate(n, t, chi, ctx, g);
            const int k = mutate_sampler(p).draw(j, g);
            if (k > best) best = k;
        }

        StepReport rep;
        rep.t = t;
        rep.parent_matching = j;
        rep.best_offspring_matching = best;
        rep.selected_matching = std::max(j, best);
        rep.hit = rep.selected_matching == n;
        rep.offspring_selected = best >= j;
        parent.matching = rep.selected_matching;
        return rep;
    }

private:
    const KernelRowSampler& mutate_sampler(double rate) {
        for (int k = 0; k < memo_size_; ++k)
            if (memo_rate_[k] == rate) return *memo_tab_[k];
        std::uint64_t bits;
        __builtin_memcpy(&bits, &rate, sizeof(bits));
        auto it = samplers_.find(bits);
        if (it == samplers_.end())
            it = samplers_
                     .emplace(bits, std::make_unique<KernelRowSampler>(mutate_kernel(n_, rate)))
                     .first;
        const KernelRowSampler* s = it->second.get();
        const int slot = memo_size_ < kMemoCap ? memo_size_++ : (memo_rr_++ % kMemoCap);
        memo_rate_[slot] = rate;
        memo_tab_[slot] = s;
        return *s;
    }

    static constexpr int kMemoCap = 12;
    int n_;
    BinomialTableCache shift_tables_;
    int memo_size_ = 0;
    unsigned memo_rr_ = 0;
    double memo_rate_[kMemoCap] = {};
    const KernelRowSampler* memo_tab_[kMemoCap] = {};
    std::unordered_map<std::uint64_t, std::unique_ptr<KernelRowSampler>> samplers_;
};

namespace detail {

template <typename StepFn>
RunRecord run_loop(const RunConfig& cfg, int initial_matching, StepFn&& do_step) {
    RunRecord rec;
    rec.initial_matching = initial_matching;
    const int eps_count = eps_threshold_count(cfg.n, cfg.epsilon);

    std::optional<IntervalDecomposition> dec;
    if (cfg.record_intervals && cfg.schedule.is_fixed()) {
        try {
            dec = decompose(cfg.n, cfg.schedule.rate(1));
        } catch (const std::invalid_argument&) {
            dec.reset();
        }
    }
    rec.has_interval_labels = dec.has_value();

    ConditionContext ctx;
    int last_selected = initial_matching;
    int best_seen = 0;
    for (long long t = 0; t < cfg.max_generations; ++t) {
        const StepReport rep = do_step(t, ctx);
        rec.generations = t + 1;
        rec.evaluations += 1 + cfg.lambda;
        last_selected = rep.selected_matching;

        if (dec) {
            const auto [fl, sl] = dec->classify(rep.selected_matching);
            rec.first_level_occupancy[std::size_t(fl)] += 1;
            rec.second_level_occupancy[std::size_t(sl)] += 1;
            if (t == 0) rec.initial_first_level = fl;
        }
        if (cfg.record_best_ratio) {
            // the trace carries the best-case ratio: a running maximum
            best_seen = std::max(best_seen, rep.selected_matching);
            rec.best_ratio_trace.push_back(double(best_seen) / double(cfg.n));
        }

        if (rec.eps_censored && rep.selected_matching >= eps_count) {
            rec.eps_censored = false;
            rec.eps_hit_generation = t;
        }
        if (rep.hit) {
            rec.censored = false;
            rec.hit_generation = t;
            break;
        }

        ctx.prev_parent_fitness = ctx.parent_fitness;
        ctx.last_accepted = rep.offspring_selected;
    }
    rec.final_matching = last_selected;
    return rec;
}

}  // namespace detail

/// Execute one full run. Deterministic given (seed, replication); the count
/// mode is the fast path for BitMatching_D, the genome mode carries real bit
/// strings. Censoring at max_generations is an outcome, not an error.
inline RunRecord run(const RunConfig& cfg) {
    validate_config(cfg);
    StreamFactory streams{cfg.seed, cfg.replication};
    RandomStream init = streams.init();

    if (cfg.mode == RunMode::Count) {
        CountState parent{cfg.n, binomial_draw(cfg.n, 0.5, init)};
        CountStepper stepper(cfg.n);
        return detail::run_loop(cfg, parent.matching, [&](long long t, ConditionContext& ctx) {
            const double sigma_t = t > 0 ? cfg.schedule.rate(t) : 0.0;
            return stepper.step(parent, sigma_t, *cfg.scheme, cfg.lambda, streams, t, ctx);
        });
    }

    Genome parent = Genome::random(cfg.n, init);
    ProblemState state = make_problem(cfg.n, cfg.schedule, init);
    const int init_matching = cfg.n - hamming(parent, state.optimum);
    return detail::run_loop(cfg, init_matching, [&](long long t, ConditionContext& ctx) {
        return step_one_plus_lambda(parent, state, *cfg.scheme, cfg.lambda, streams, t, ctx);
    });
}

/// Genome-mode run against a user-supplied stationary fitness. The hit
/// condition stays genome equality with the unique optimum; the epsilon hit
/// uses the fitness ratio.
inline RunRecord run(const RunConfig& cfg, const FitnessFn& fitness) {
    validate_config(cfg);
    if (cfg.mode != RunMode::Genome)
        throw std::invalid_argument("custom fitness requires genome mode");
    if (!fitness) return run(cfg);

    StreamFactory streams{cfg.seed, cfg.replication};
    RandomStream init = streams.init();
    Genome parent = Genome::random(cfg.n, init);
    ProblemState state = make_problem(cfg.n, cfg.schedule, init);
    const int init_matching = cfg.n - hamming(parent, state.optimum);

    RunRecord rec;
    rec.initial_matching = init_matching;
    ConditionContext ctx;
    int last_selected = init_matching;
    for (long long t = 0; t < cfg.max_generations; ++t) {
        const StepReport rep =
            step_one_plus_lambda(parent, state, *cfg.scheme, cfg.lambda, streams, t, ctx, fitness);
        rec.generations = t + 1;
        rec.evaluations += 1 + cfg.lambda;
        last_selected = rep.selected_matching;

        if (rec.eps_censored) {
            const double fbest = fitness(parent, state.optimum);
            const double fopt = fitness(state.optimum, state.optimum);
            if (fopt != 0.0 && fbest / fopt >= 1.0 - cfg.epsilon - 1e-12) {
                rec.eps_censored = false;
                rec.eps_hit_generation = t;
            }
        }
        if (rep.hit) {
            rec.censored = false;
            rec.hit_generation = t;
            break;
        }
        ctx.prev_parent_fitness = ctx.parent_fitness;
        ctx.last_accepted = rep.offspring_selected;
    }
    rec.final_matching = last_selected;
    return rec;
}

}  // namespace evodyn
