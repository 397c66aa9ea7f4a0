#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "evodyn/genome.hpp"
#include "evodyn/random.hpp"

namespace evodyn {

inline void validate_shift_rate(double sigma, const char* what = "sigma") {
    if (!(sigma > 0.0) || sigma > 0.5)
        throw std::invalid_argument(std::string(what) + " outside (0, 1/2]");
}

/// Per-phase flip probability of the optimum's random walk. Either one
/// constant rate or a total mapping from phase index to a rate; every
/// produced rate must lie in (0, 1/2].
class ShiftSchedule {
public:
    static ShiftSchedule fixed(double sigma) {
        validate_shift_rate(sigma);
        ShiftSchedule s;
        s.fixed_ = sigma;
        return s;
    }

    static ShiftSchedule time_variable(std::function<double(long long)> fn) {
        if (!fn) throw std::invalid_argument("ShiftSchedule: empty mapping");
        ShiftSchedule s;
        s.fn_ = std::move(fn);
        return s;
    }

    bool is_fixed() const { return !fn_; }

    double rate(long long phase) const {
        const double r = fn_ ? fn_(phase) : fixed_;
        validate_shift_rate(r, "sigma(t)");
        return r;
    }

private:
    ShiftSchedule() = default;
    double fixed_ = 0.0;
    std::function<double(long long)> fn_;
};

/// Dynamic problem state: phase index, current optimum genome, and the
/// shifting-rate schedule. Owned by exactly one run; never shared.
struct ProblemState {
    long long phase = 0;
    Genome optimum;
    ShiftSchedule schedule;

    ProblemState(Genome opt, ShiftSchedule sched)
        : optimum(std::move(opt)), schedule(std::move(sched)) {}
};

/// Uniform initial optimum, independent of any EA individual.
inline ProblemState make_problem(int n, ShiftSchedule schedule, RandomStream& g) {
    return ProblemState(Genome::random(n, g), std::move(schedule));
}

/// Advance the optimum's random walk by one phase: each bit flips
/// independently with the schedule rate of the phase being entered.
/// Takes no individual, so the walk cannot observe the EA.
inline void advance_phase(ProblemState& state, RandomStream& g) {
    const double sigma = state.schedule.rate(state.phase + 1);
    state.optimum.flip_each(sigma, g);
    state.phase += 1;
}

inline int bitmatching_fitness(const Genome& x, const ProblemState& state) {
    return state.optimum.size() - hamming(x, state.optimum);
}

/// Count-space counterpart of one optimum shift applied to a tracked
/// individual: matching bits flip away, non-matching bits flip in.
inline CountState shift_counts(CountState cs, double sigma, RandomStream& g) {
    validate_count_state(cs);
    validate_shift_rate(sigma);
    const int lost = binomial_draw(cs.matching, sigma, g);
    const int gained = binomial_draw(cs.n - cs.matching, sigma, g);
    return CountState{cs.n, cs.matching - lost + gained};
}

}  // namespace evodyn
