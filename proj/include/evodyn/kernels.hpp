#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evodyn/problem.hpp"

namespace evodyn {

/// Effective per-bit flip probability of an optimum shift followed by a
/// mutation: r = p(1-σ) + σ(1-p).
inline double composite_rate(double p, double sigma) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("composite_rate: p outside [0,1]");
    validate_shift_rate(sigma);
    return p * (1.0 - sigma) + sigma * (1.0 - p);
}

/// Row-stochastic (n+1)x(n+1) matrix over matching-bit counts.
struct TransitionKernel {
    enum class Kind { Shift, Mutate, Composed };

    int n = 0;
    Kind kind = Kind::Shift;
    double param = 0.0;  // σ for Shift, p for Mutate; unused for Composed
    std::vector<double> values;  // row-major, (n+1)^2

    double at(int i, int j) const { return values[std::size_t(i) * (n + 1) + j]; }
    double& at(int i, int j) { return values[std::size_t(i) * (n + 1) + j]; }

    double row_sum(int i) const {
        double acc = 0.0, c = 0.0;
        for (int j = 0; j <= n; ++j) {
            const double y = at(i, j) - c;
            const double t = acc + y;
            c = (t - acc) - y;
            acc = t;
        }
        return acc;
    }

    void write_csv(std::ostream& os) const {
        char buf[32];
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", at(i, j));
                os << (j ? "," : "") << buf;
            }
            os << '\n';
        }
    }
};

namespace detail {

/// Pascal triangle in doubles up to row n (exact for n <= 56, ~1 ulp/add
/// beyond).
inline std::vector<std::vector<double>> choose_table(int n) {
    std::vector<std::vector<double>> c(std::size_t(n) + 1);
    for (int m = 0; m <= n; ++m) {
        c[std::size_t(m)].assign(std::size_t(m) + 1, 1.0);
        for (int k = 1; k < m; ++k)
            c[std::size_t(m)][std::size_t(k)] =
                c[std::size_t(m) - 1][std::size_t(k) - 1] + c[std::size_t(m) - 1][std::size_t(k)];
    }
    return c;
}

/// One-step kernel of the bitwise mapping that flips every bit with rate r:
/// entry (i, j) sums over k flipped matching bits and j-i+k flipped
/// non-matching bits.
inline TransitionKernel bitflip_count_kernel(int n, double r, TransitionKernel::Kind kind) {
    if (n <= 0) throw std::invalid_argument("kernel: problem size must be positive");
    TransitionKernel K;
    K.n = n;
    K.kind = kind;
    K.param = r;
    K.values.assign(std::size_t(n + 1) * (n + 1), 0.0);

    if (r <= 0.0) {
        for (int i = 0; i <= n; ++i) K.at(i, i) = 1.0;
        return K;
    }
    if (r >= 1.0) {
        for (int i = 0; i <= n; ++i) K.at(i, n - i) = 1.0;
        return K;
    }

    const auto C = choose_table(n);
    std::vector<double> pow_r(std::size_t(n) + 1, 1.0), pow_q(std::size_t(n) + 1, 1.0);
    for (int w = 1; w <= n; ++w) {
        pow_r[std::size_t(w)] = pow_r[std::size_t(w) - 1] * r;
        pow_q[std::size_t(w)] = pow_q[std::size_t(w) - 1] * (1.0 - r);
    }

    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const int k_lo = std::max(0, i - j);
            const int k_hi = std::min(i, n - j);
            double acc = 0.0, comp = 0.0;
            for (int k = k_lo; k <= k_hi; ++k) {
                const int gains = j - i + k;  // flipped non-matching bits
                const int w = gains + k;      // total flipped bits
                const double term = C[std::size_t(n - i)][std::size_t(gains)] *
                                    C[std::size_t(i)][std::size_t(k)] *
                                    pow_r[std::size_t(w)] * pow_q[std::size_t(n - w)];
                const double y = term - comp;
                const double t = acc + y;
                comp = (t - acc) - y;
                acc = t;
            }
            K.at(i, j) = acc;
        }
        // Row sums land within ~1e-13 of 1; renormalize only when the drift
        // exceeds the stochasticity tolerance so raw values stay verifiable
        // against enumeration.
        const double s = K.row_sum(i);
        if (std::abs(s - 1.0) > 1e-12)
            for (int j = 0; j <= n; ++j) K.at(i, j) /= s;
    }
    return K;
}

}  // namespace detail

/// Kernel of one optimum shift: π_{i,j} over matching-bit counts.
inline TransitionKernel shift_kernel(int n, double sigma) {
    validate_shift_rate(sigma);
    return detail::bitflip_count_kernel(n, sigma, TransitionKernel::Kind::Shift);
}

/// Kernel of one bitwise mutation at rate p (p=0 is the identity, p=1 the
/// complement permutation).
inline TransitionKernel mutate_kernel(int n, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mutate_kernel: p outside [0,1]");
    return detail::bitflip_count_kernel(n, p, TransitionKernel::Kind::Mutate);
}

namespace detail {

/// Per-state CDF rows of a mutate kernel, for max-of-λ composition.
inline std::vector<std::vector<double>> kernel_cdf(const TransitionKernel& K) {
    std::vector<std::vector<double>> cdf(std::size_t(K.n) + 1);
    for (int i = 0; i <= K.n; ++i) {
        auto& row = cdf[std::size_t(i)];
        row.resize(std::size_t(K.n) + 1);
        double acc = 0.0;
        for (int j = 0; j <= K.n; ++j) {
            acc += K.at(i, j);
            row[std::size_t(j)] = std::min(acc, 1.0);
        }
    }
    return cdf;
}

struct RateGroup {
    double rate;
    int count;
    std::vector<std::vector<double>> cdf;  // mutate kernel CDF rows
};

inline std::vector<RateGroup> group_rates(int n, const std::vector<double>& rates) {
    std::map<double, int> counts;
    for (double r : rates) {
        if (r < 0.0 || r > 1.0)
            throw std::invalid_argument("composed_step_kernel: rate outside [0,1]");
        counts[r] += 1;
    }
    std::vector<RateGroup> groups;
    groups.reserve(counts.size());
    for (const auto& [r, c] : counts)
        groups.push_back(RateGroup{r, c, kernel_cdf(mutate_kernel(n, r))});
    return groups;
}

/// P(max over all offspring draws <= m | parent post-shift state j).
inline double max_cdf(const std::vector<RateGroup>& groups, int j, int m) {
    double acc = 1.0;
    for (const auto& g : groups) {
        const double base = g.cdf[std::size_t(j)][std::size_t(m)];
        double p = 1.0;
        for (int c = 0; c < g.count; ++c) p *= base;
        acc *= p;
    }
    return acc;
}

inline TransitionKernel compose_with_shift(const TransitionKernel& S,
                                           const std::vector<double>& rates,
                                           bool absorbing) {
    const int n = S.n;
    const auto groups = group_rates(n, rates);

    TransitionKernel K;
    K.n = n;
    K.kind = TransitionKernel::Kind::Composed;
    K.param = std::numeric_limits<double>::quiet_NaN();
    K.values.assign(std::size_t(n + 1) * (n + 1), 0.0);

    for (int i = 0; i <= n; ++i) {
        if (absorbing && i == n) {
            K.at(n, n) = 1.0;
            continue;
        }
        for (int j = 0; j <= n; ++j) {
            const double pj = S.at(i, j);
            if (pj == 0.0) continue;
            // Selected state is max(j, best offspring); offspring draws are
            // independent given j.
            double prev = 0.0;
            for (int m = j; m <= n; ++m) {
                const double cd = max_cdf(groups, j, m);
                K.at(i, m) += pj * (cd - prev);
                prev = cd;
            }
        }
        const double s = K.row_sum(i);
        if (std::abs(s - 1.0) > 1e-12)
            for (int j = 0; j <= n; ++j) K.at(i, j) /= s;
    }
    return K;
}

inline TransitionKernel identity_shift(int n) {
    TransitionKernel S;
    S.n = n;
    S.kind = TransitionKernel::Kind::Shift;
    S.param = 0.0;
    S.values.assign(std::size_t(n + 1) * (n + 1), 0.0);
    for (int i = 0; i <= n; ++i) S.at(i, i) = 1.0;
    return S;
}

}  // namespace detail

/// Inverse-CDF sampler over the rows of a transition kernel: draw(from)
/// samples the next state in one uniform draw. A per-row guide table maps a
/// uniform bucket to a starting index, so the expected scan is O(1).
class KernelRowSampler {
public:
    explicit KernelRowSampler(const TransitionKernel& K) : n_(K.n) {
        const std::size_t w = std::size_t(n_) + 1;
        cdf_.resize(w * w);
        guide_.resize(w * (kBuckets + 1));
        for (int i = 0; i <= n_; ++i) {
            double acc = 0.0;
            double* row = cdf_.data() + std::size_t(i) * w;
            for (int j = 0; j <= n_; ++j) {
                acc += K.at(i, j);
                row[j] = std::min(acc, 1.0);
            }
            int* g = guide_.data() + std::size_t(i) * (kBuckets + 1);
            int j = 0;
            for (int h = 0; h <= kBuckets; ++h) {
                const double threshold = double(h) / double(kBuckets);
                while (j < n_ && row[j] <= threshold) ++j;
                g[h] = j;
                j = g[h];
            }
        }
    }

    int size() const { return n_; }

    int draw(int from, RandomStream& g) const {
        const double* row = cdf_.data() + std::size_t(from) * (n_ + 1);
        const int* guide = guide_.data() + std::size_t(from) * (kBuckets + 1);
        const double u = g.uniform01();
        int j = guide[int(u * kBuckets)];
        while (j < n_ && row[j] <= u) ++j;
        return j;
    }

private:
    static constexpr int kBuckets = 64;
    int n_;
    std::vector<double> cdf_;
    std::vector<int> guide_;
};

/// One full selected-max generation step over matching-bit counts: shift
/// with rate σ, then λ offspring mutations with the given per-offspring
/// rates, then elitist max selection. The absorbing variant pins state n.
inline TransitionKernel composed_step_kernel(int n, double sigma,
                                             const std::vector<double>& rates,
                                             bool absorbing = false) {
    if (rates.empty()) throw std::invalid_argument("composed_step_kernel: empty rate list");
    return detail::compose_with_shift(shift_kernel(n, sigma), rates, absorbing);
}

/// Generation-0 step: no shift precedes the first generation, so the
/// composition degenerates to mutation plus selection.
inline TransitionKernel initial_step_kernel(int n, const std::vector<double>& rates,
                                            bool absorbing = false) {
    if (rates.empty()) throw std::invalid_argument("initial_step_kernel: empty rate list");
    return detail::compose_with_shift(detail::identity_shift(n), rates, absorbing);
}

}  // namespace evodyn
