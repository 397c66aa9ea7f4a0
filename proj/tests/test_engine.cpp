#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "evodyn/engine.hpp"
#include "evodyn/hitting.hpp"
#include "evodyn/kernels.hpp"
#include "evodyn/stats.hpp"
#include "support.hpp"

using namespace evodyn;

namespace {

RunConfig base_config(int n, double sigma, SchemePtr scheme, int lambda = 1) {
    RunConfig cfg;
    cfg.n = n;
    cfg.lambda = lambda;
    cfg.scheme = std::move(scheme);
    cfg.schedule = ShiftSchedule::fixed(sigma);
    cfg.max_generations = 1000000;
    cfg.seed = 1;
    return cfg;
}

bool records_equal(const RunRecord& a, const RunRecord& b) {
    return a.censored == b.censored && a.hit_generation == b.hit_generation &&
           a.eps_censored == b.eps_censored && a.eps_hit_generation == b.eps_hit_generation &&
           a.generations == b.generations && a.evaluations == b.evaluations &&
           a.initial_matching == b.initial_matching && a.final_matching == b.final_matching;
}

}  // namespace

TEST_CASE("full-rate mutation produces the complement", "[engine]") {
    const int n = 7;
    StreamFactory streams{11, 0};
    RandomStream init = streams.init();
    Genome parent = Genome::random(n, init);
    ProblemState state = make_problem(n, ShiftSchedule::fixed(0.3), init);
    const int before = n - hamming(parent, state.optimum);

    ConditionContext ctx;
    const StepReport rep =
        step_one_plus_one(parent, state, *fixed_scheme(1.0), streams, 0, ctx);
    CHECK(rep.parent_matching == before);
    CHECK(rep.best_offspring_matching == n - before);
    CHECK(rep.selected_matching == std::max(before, n - before));
}

TEST_CASE("zero-rate offspring ties keep the parent genome", "[engine]") {
    const int n = 12;
    StreamFactory streams{13, 0};
    RandomStream init = streams.init();
    Genome parent = Genome::random(n, init);
    const Genome snapshot = parent;
    ProblemState state = make_problem(n, ShiftSchedule::fixed(0.2), init);

    ConditionContext ctx;
    const StepReport rep =
        step_one_plus_lambda(parent, state, *fixed_scheme(0.0), 3, streams, 0, ctx);
    CHECK(rep.offspring_selected);  // tie goes to the offspring
    CHECK(parent == snapshot);      // which is a bit-identical copy
}

TEST_CASE("lambda=1 path is exactly the (1+1) path", "[engine]") {
    const int n = 9;
    for (std::uint64_t seed : {3ull, 14ull, 15ull}) {
        StreamFactory s1{seed, 0}, s2{seed, 0};
        RandomStream i1 = s1.init(), i2 = s2.init();
        Genome p1 = Genome::random(n, i1), p2 = Genome::random(n, i2);
        ProblemState st1 = make_problem(n, ShiftSchedule::fixed(0.1), i1);
        ProblemState st2 = make_problem(n, ShiftSchedule::fixed(0.1), i2);
        const auto scheme = banded_scheme(0.05, 0.4, "cycle");
        ConditionContext c1, c2;
        for (long long t = 0; t < 50; ++t) {
            const StepReport r1 = step_one_plus_one(p1, st1, *scheme, s1, t, c1);
            const StepReport r2 = step_one_plus_lambda(p2, st2, *scheme, 1, s2, t, c2);
            REQUIRE(r1.parent_matching == r2.parent_matching);
            REQUIRE(r1.selected_matching == r2.selected_matching);
            REQUIRE(p1 == p2);
        }
    }
}

TEST_CASE("single step matches the composed kernel", "[engine][oracle][statistical]") {
    // n=2, sigma=0.25, P_m=0.5, parent matching 1: the step outcome follows
    // the composed exact kernel row.
    const int n = 2;
    const double sigma = 0.25;
    const TransitionKernel C = composed_step_kernel(n, sigma, {0.5});

    std::vector<long long> counts(std::size_t(n) + 1, 0);
    const long long samples = 200000;
    for (long long s = 0; s < samples; ++s) {
        auto [parent, opt] = testsupport::genomes_with_matching(n, 1);
        ProblemState state(opt, ShiftSchedule::fixed(sigma));
        StreamFactory streams{std::uint64_t(s), 7};
        ConditionContext ctx;
        // phase must equal t-1 at entry for t >= 1
        const StepReport rep =
            step_one_plus_one(parent, state, *fixed_scheme(0.5), streams, 1, ctx);
        counts[std::size_t(rep.selected_matching)] += 1;
    }
    std::vector<double> expected(std::size_t(n) + 1, 0.0);
    for (int m = 0; m <= n; ++m) expected[std::size_t(m)] = C.at(1, m);
    const auto [stat, dof] = chi_square_gof(counts, expected, double(samples));
    CHECK(stat < chi_squared_quantile(double(dof), 0.999));
}

TEST_CASE("two-offspring step matches the composed kernel", "[engine][oracle][statistical]") {
    const int n = 2;
    const double sigma = 0.25;
    const TransitionKernel C = composed_step_kernel(n, sigma, {0.5, 0.5});

    std::vector<long long> counts(std::size_t(n) + 1, 0);
    const long long samples = 200000;
    for (long long s = 0; s < samples; ++s) {
        auto [parent, opt] = testsupport::genomes_with_matching(n, 1);
        ProblemState state(opt, ShiftSchedule::fixed(sigma));
        StreamFactory streams{std::uint64_t(s), 8};
        ConditionContext ctx;
        const StepReport rep =
            step_one_plus_lambda(parent, state, *fixed_scheme(0.5), 2, streams, 1, ctx);
        counts[std::size_t(rep.selected_matching)] += 1;
    }
    std::vector<double> expected(std::size_t(n) + 1, 0.0);
    for (int m = 0; m <= n; ++m) expected[std::size_t(m)] = C.at(1, m);
    const auto [stat, dof] = chi_square_gof(counts, expected, double(samples));
    CHECK(stat < chi_squared_quantile(double(dof), 0.999));
}

TEST_CASE("runs are deterministic", "[engine]") {
    for (RunMode mode : {RunMode::Count, RunMode::Genome}) {
        RunConfig cfg = base_config(10, 0.05, banded_scheme(0.05, 0.3, "log-uniform"), 2);
        cfg.mode = mode;
        cfg.seed = 909;
        cfg.replication = 4;
        const RunRecord a = run(cfg);
        const RunRecord b = run(cfg);
        CHECK(records_equal(a, b));
    }
}

TEST_CASE("evaluation accounting", "[engine]") {
    RunConfig cfg = base_config(6, 0.1, fixed_scheme(1.0 / 6.0), 3);
    for (std::uint64_t r = 0; r < 200; ++r) {
        cfg.replication = r;
        const RunRecord rec = run(cfg);
        REQUIRE(rec.evaluations == rec.generations * (1 + cfg.lambda));
        if (!rec.censored) {
            REQUIRE(rec.generations == rec.hit_generation + 1);
            REQUIRE(rec.final_matching == cfg.n);
        }
        if (!rec.eps_censored && !rec.censored)
            REQUIRE(rec.eps_hit_generation <= rec.hit_generation);
    }
}

TEST_CASE("selection never loses matching bits within a generation", "[engine][property]") {
    const int n = 14;
    CountStepper stepper(n);
    StreamFactory streams{33, 0};
    CountState parent{n, 7};
    ConditionContext ctx;
    const auto scheme = banded_scheme(0.02, 0.5, "log-uniform");
    for (long long t = 0; t < 20000; ++t) {
        const StepReport rep = stepper.step(parent, 0.08, *scheme, 3, streams, t, ctx);
        REQUIRE(rep.selected_matching >= rep.parent_matching);
        REQUIRE(rep.selected_matching ==
                std::max(rep.parent_matching, rep.best_offspring_matching));
    }
}

TEST_CASE("one-bit problems hit immediately at least half the time", "[engine][statistical]") {
    RunConfig cfg = base_config(1, 0.25, fixed_scheme(0.5));
    long long hits_at_zero = 0;
    const long long runs_n = 20000;
    for (long long r = 0; r < runs_n; ++r) {
        cfg.replication = std::uint64_t(r);
        const RunRecord rec = run(cfg);
        if (!rec.censored && rec.hit_generation == 0) ++hits_at_zero;
    }
    // P(hit at 0) = 1/2 + 1/2 * P(offspring hits) >= 1/2.
    CHECK(double(hits_at_zero) / double(runs_n) > 0.5);
}

TEST_CASE("loose approximation targets are met at generation zero", "[engine]") {
    RunConfig cfg = base_config(16, 0.1, fixed_scheme(1.0 / 16.0));
    cfg.epsilon = 0.5;
    cfg.max_generations = 64;
    for (std::uint64_t r = 0; r < 400; ++r) {
        cfg.replication = r;
        const RunRecord rec = run(cfg);
        if (rec.initial_matching >= 8) {
            REQUIRE_FALSE(rec.eps_censored);
            REQUIRE(rec.eps_hit_generation == 0);
        }
    }
}

TEST_CASE("censoring is an outcome", "[engine]") {
    RunConfig cfg = base_config(24, 0.5, fixed_scheme(1.0 / 24.0));
    cfg.max_generations = 5;
    cfg.replication = 3;
    const RunRecord rec = run(cfg);
    CHECK(rec.censored);
    CHECK(rec.hit_generation == -1);
    CHECK(rec.generations == 5);
    CHECK(rec.evaluations == 10);
}

TEST_CASE("config validation", "[engine]") {
    RunConfig cfg = base_config(8, 0.1, fixed_scheme(0.1));
    cfg.lambda = 0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg.lambda = 1;
    cfg.epsilon = 1.0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg.epsilon = 0.0;
    cfg.max_generations = 0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
}

TEST_CASE("genome and count modes agree in distribution", "[engine][statistical]") {
    const int n = 10;
    const double sigma = 0.05;
    const double p = 0.2;
    RunConfig cfg = base_config(n, sigma, fixed_scheme(p), 2);
    cfg.max_generations = 100000;

    const long long runs_n = 100000;
    const int tau_bins = 64;
    std::vector<long long> tau_a(std::size_t(tau_bins) + 1, 0), tau_b(tau_a);
    std::vector<double> means_a, means_b;
    means_a.reserve(std::size_t(runs_n));
    means_b.reserve(std::size_t(runs_n));

    for (long long r = 0; r < runs_n; ++r) {
        cfg.replication = std::uint64_t(r);
        cfg.mode = RunMode::Count;
        const RunRecord a = run(cfg);
        cfg.mode = RunMode::Genome;
        const RunRecord b = run(cfg);
        REQUIRE_FALSE(a.censored);
        REQUIRE_FALSE(b.censored);
        tau_a[std::size_t(std::min<long long>(a.hit_generation, tau_bins))] += 1;
        tau_b[std::size_t(std::min<long long>(b.hit_generation, tau_bins))] += 1;
        means_a.push_back(double(a.hit_generation));
        means_b.push_back(double(b.hit_generation));
    }

    const auto [stat, dof] = chi_square_two_sample(tau_a, tau_b);
    CHECK(stat < chi_squared_quantile(double(dof), 0.999));

    // and both agree with the exact absorbing chain
    const FhtResult exact = exact_mean_fht(n, sigma, {p, p});
    const MeanSE ma = mean_se(means_a);
    const MeanSE mb = mean_se(means_b);
    INFO("count " << ma.mean << " genome " << mb.mean << " exact " << exact.overall);
    CHECK(std::abs(ma.mean - exact.overall) <= 3.0 * ma.se);
    CHECK(std::abs(mb.mean - exact.overall) <= 3.0 * mb.se);
}

TEST_CASE("time-variable shifting rates drive the walk", "[engine]") {
    RunConfig cfg;
    cfg.n = 12;
    cfg.lambda = 1;
    cfg.scheme = fixed_scheme(1.0 / 12.0);
    cfg.schedule = ShiftSchedule::time_variable(
        [](long long t) { return t < 10 ? 0.5 : 0.01; });
    cfg.max_generations = 50000;
    cfg.seed = 51;
    const RunRecord a = run(cfg);
    const RunRecord b = run(cfg);
    CHECK(records_equal(a, b));
    cfg.mode = RunMode::Genome;
    CHECK_NOTHROW(run(cfg));
}

namespace {

/// Captures the condition context the engine hands to schemes.
class ProbeScheme final : public MutationScheme {
public:
    ProbeScheme() : MutationScheme("probe", false, 0.1, 0.1) {}
    mutable std::vector<ConditionContext> seen;

protected:
    double rate_impl(int, long long, int, const ConditionContext& ctx,
                     RandomStream&) const override {
        seen.push_back(ctx);
        return 0.1;
    }
};

}  // namespace

TEST_CASE("condition context carries observable signals only", "[engine]") {
    auto probe = std::make_shared<ProbeScheme>();
    RunConfig cfg;
    cfg.n = 10;
    cfg.lambda = 2;
    cfg.scheme = probe;
    cfg.schedule = ShiftSchedule::fixed(0.1);
    cfg.max_generations = 25;
    cfg.seed = 61;
    run(cfg);

    REQUIRE(!probe->seen.empty());
    const ConditionContext& first = probe->seen.front();
    CHECK(first.t == 0);
    CHECK(first.lambda == 2);
    CHECK_FALSE(first.prev_parent_fitness.has_value());
    CHECK_FALSE(first.oracle_matching.has_value());  // withheld: not an oracle
    for (const auto& ctx : probe->seen) {
        CHECK_FALSE(ctx.oracle_matching.has_value());
        if (ctx.t > 0) CHECK(ctx.prev_parent_fitness.has_value());
        CHECK(ctx.parent_fitness >= 0.0);
        CHECK(ctx.parent_fitness <= 10.0);
    }
}

TEST_CASE("best-case ratio trace is a running maximum", "[engine]") {
    RunConfig cfg;
    cfg.n = 16;
    cfg.lambda = 1;
    cfg.scheme = fixed_scheme(1.0 / 16.0);
    cfg.schedule = ShiftSchedule::fixed(0.2);
    cfg.max_generations = 400;
    cfg.seed = 71;
    cfg.record_best_ratio = true;
    const RunRecord rec = run(cfg);
    REQUIRE(!rec.best_ratio_trace.empty());
    for (std::size_t i = 1; i < rec.best_ratio_trace.size(); ++i)
        REQUIRE(rec.best_ratio_trace[i] >= rec.best_ratio_trace[i - 1]);
    if (!rec.censored) CHECK(rec.best_ratio_trace.back() == 1.0);
}

TEST_CASE("genome mode accepts a user-supplied fitness", "[engine]") {
    RunConfig cfg;
    cfg.n = 8;
    cfg.lambda = 2;
    cfg.scheme = fixed_scheme(1.0 / 8.0);
    cfg.schedule = ShiftSchedule::fixed(0.02);
    cfg.max_generations = 100000;
    cfg.seed = 81;
    cfg.mode = RunMode::Genome;
    // exponentially weighted agreement; unique optimum preserved
    const FitnessFn fitness = [](const Genome& x, const Genome& opt) {
        return std::exp(-double(hamming(x, opt)));
    };
    const RunRecord rec = run(cfg, fitness);
    REQUIRE_FALSE(rec.censored);
    CHECK(rec.final_matching == 8);

    cfg.mode = RunMode::Count;
    CHECK_THROWS_AS(run(cfg, fitness), std::invalid_argument);
}

TEST_CASE("oracle-driven runs replay deterministically", "[engine]") {
    RunConfig cfg;
    cfg.n = 12;
    cfg.lambda = 4;
    cfg.scheme = oracle_greedy_scheme({1.0 / 12.0, 0.25, 1.0});
    cfg.schedule = ShiftSchedule::fixed(0.1);
    cfg.max_generations = 5000;
    cfg.seed = 91;
    const RunRecord a = run(cfg);
    const RunRecord b = run(cfg);
    CHECK(records_equal(a, b));
    // a fresh scheme instance makes the same choices
    RunConfig cfg2 = cfg;
    cfg2.scheme = oracle_greedy_scheme({1.0 / 12.0, 0.25, 1.0});
    const RunRecord c = run(cfg2);
    CHECK(records_equal(a, c));
}
