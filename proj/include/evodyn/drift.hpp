#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "evodyn/kernels.hpp"
#include "evodyn/random.hpp"

namespace evodyn {

struct DriftEstimate {
    int state = 0;
    long long samples = 0;
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo one-step mean drift of D(X, t) = n - N at each given state:
/// a synthetic parent with exactly `state` matching bits takes one
/// shift-mutate-select step, and the drift sample is N_t - state.
inline std::vector<DriftEstimate> estimate_drift(int n, double sigma,
                                                 const std::vector<double>& rates,
                                                 const std::vector<int>& states,
                                                 long long samples, std::uint64_t seed) {
    validate_shift_rate(sigma);
    if (samples <= 0) throw std::invalid_argument("estimate_drift: samples must be positive");
    if (rates.empty()) throw std::invalid_argument("estimate_drift: empty rate list");
    for (int s : states)
        if (s < 0 || s >= n) throw std::invalid_argument("estimate_drift: state outside [0, n-1]");

    BinomialTableCache tables(n);
    const BinomialTable& shift_tab = tables.table(sigma);

    std::vector<DriftEstimate> out;
    out.reserve(states.size());
    for (int i : states) {
        double sum = 0.0, sumsq = 0.0;
        for (long long s = 0; s < samples; ++s) {
            RandomStream sh = stream_for(seed, std::uint64_t(s), 1, StreamRole::Shift);
            const int lost = shift_tab.draw(i, sh);
            const int gained = shift_tab.draw(n - i, sh);
            const int j = i - lost + gained;
            int best = j;
            for (std::size_t chi = 0; chi < rates.size(); ++chi) {
                RandomStream mu =
                    stream_for(seed, std::uint64_t(s), 1, StreamRole::Mutation, chi + 1);
                const BinomialTable& mt = tables.table(rates[chi]);
                const int k = j - mt.draw(j, mu) + mt.draw(n - j, mu);
                if (k > best) best = k;
            }
            const double d = double(best - i);
            sum += d;
            sumsq += d * d;
        }
        DriftEstimate e;
        e.state = i;
        e.samples = samples;
        e.mean = sum / double(samples);
        const double var = (sumsq - sum * sum / double(samples)) / double(samples - 1);
        e.std_error = std::sqrt(std::max(var, 0.0) / double(samples));
        out.push_back(e);
    }
    return out;
}

/// Exact one-step mean drift from the composed kernel.
inline std::vector<double> exact_drift(int n, double sigma, const std::vector<double>& rates,
                                       const std::vector<int>& states) {
    const TransitionKernel K = composed_step_kernel(n, sigma, rates, /*absorbing=*/false);
    std::vector<double> out;
    out.reserve(states.size());
    for (int i : states) {
        if (i < 0 || i >= n) throw std::invalid_argument("exact_drift: state outside [0, n-1]");
        double e = 0.0;
        for (int m = 0; m <= n; ++m) e += double(m) * K.at(i, m);
        out.push_back(e - double(i));
    }
    return out;
}

}  // namespace evodyn
