#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "evodyn/kernels.hpp"

namespace evodyn {

inline constexpr int kExactSolveMaxN = 64;

struct FhtResult {
    /// Expected generations to the first hit, entering a generation with the
    /// given matching count (indices 0..n; index n is 0 by convention when
    /// the parent hit counts).
    std::vector<double> per_state;
    /// Expectation over a uniform initial individual, including the
    /// possibility of hitting at generation 0.
    double overall = 0.0;
};

namespace detail {

/// Solve A x = b by Gaussian elimination with partial pivoting. A is dense
/// row-major, overwritten.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int m) {
    for (int col = 0; col < m; ++col) {
        int piv = col;
        double best = std::abs(a[std::size_t(col) * m + col]);
        for (int r = col + 1; r < m; ++r) {
            const double v = std::abs(a[std::size_t(r) * m + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (!(best > 1e-300))
            throw std::runtime_error("absorbing-chain solve: singular system");
        if (piv != col) {
            for (int c = col; c < m; ++c)
                std::swap(a[std::size_t(piv) * m + c], a[std::size_t(col) * m + c]);
            std::swap(b[std::size_t(piv)], b[std::size_t(col)]);
        }
        const double d = a[std::size_t(col) * m + col];
        for (int r = col + 1; r < m; ++r) {
            const double f = a[std::size_t(r) * m + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < m; ++c)
                a[std::size_t(r) * m + c] -= f * a[std::size_t(col) * m + c];
            b[std::size_t(r)] -= f * b[std::size_t(col)];
        }
    }
    std::vector<double> x(std::size_t(m), 0.0);
    for (int r = m - 1; r >= 0; --r) {
        double acc = b[std::size_t(r)];
        for (int c = r + 1; c < m; ++c) acc -= a[std::size_t(r) * m + c] * x[std::size_t(c)];
        x[std::size_t(r)] = acc / a[std::size_t(r) * m + r];
    }
    return x;
}

/// P(no offspring reaches n AND max(j, offspring) == m), from the per-group
/// CDFs; used for the offspring-only hit variant.
inline double binom_half_pmf(const std::vector<std::vector<double>>& C, int n, int i) {
    return C[std::size_t(n)][std::size_t(i)] * std::exp2(double(-n));
}

}  // namespace detail

/// Expected first hitting time of the selected-max chain with exact
/// absorbing-chain linear algebra. `include_parent_hit` decides whether the
/// shifted parent reaching n absorbs (the standard definition) or only an
/// offspring hit does.
inline FhtResult exact_mean_fht(int n, double sigma, const std::vector<double>& rates,
                                bool include_parent_hit = true) {
    if (n > kExactSolveMaxN)
        throw std::invalid_argument("exact_mean_fht: n exceeds dense-solve guard (64)");
    if (rates.empty()) throw std::invalid_argument("exact_mean_fht: empty rate list");

    const TransitionKernel S = shift_kernel(n, sigma);
    const auto groups = detail::group_rates(n, rates);

    // Transition among transient states. With parent hits counted, the
    // transients are 0..n-1 and any step reaching n absorbs. With offspring
    // hits only, state n is transient too: the parent may sit on the optimum
    // while no offspring reproduces it.
    const int m = include_parent_hit ? n : n + 1;
    std::vector<double> T(std::size_t(m) * m, 0.0);

    for (int i = 0; i < m; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double pj = S.at(i, j);
            if (pj == 0.0) continue;
            if (include_parent_hit && j == n) continue;  // absorbed via parent
            double prev = 0.0;
            for (int st = j; st <= n; ++st) {
                const double cd = detail::max_cdf(groups, j, st);
                const double mass = pj * (cd - prev);
                prev = cd;
                if (st < n)
                    T[std::size_t(i) * m + st] += mass;
                else if (!include_parent_hit && j == n) {
                    // max == n through the parent alone: not a hit unless an
                    // offspring also sits at n.
                    const double no_off_hit = detail::max_cdf(groups, j, n - 1);
                    T[std::size_t(i) * m + n] += pj * no_off_hit;
                }
            }
        }
    }

    // (I - T) E = 1
    std::vector<double> a(std::size_t(m) * m, 0.0);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            a[std::size_t(r) * m + c] = (r == c ? 1.0 : 0.0) - T[std::size_t(r) * m + c];
    std::vector<double> e = detail::solve_dense(std::move(a), std::vector<double>(std::size_t(m), 1.0), m);

    FhtResult out;
    out.per_state.assign(std::size_t(n) + 1, 0.0);
    for (int i = 0; i < m; ++i) out.per_state[std::size_t(i)] = e[std::size_t(i)];

    // Generation 0: uniform initial individual (matching ~ Binomial(n, 1/2)),
    // no preceding shift, mutation and hit check as in any generation.
    const auto C = detail::choose_table(n);
    double overall = 0.0;
    for (int i0 = 0; i0 <= n; ++i0) {
        const double w = detail::binom_half_pmf(C, n, i0);
        if (include_parent_hit && i0 == n) continue;  // hit at t=0, contributes 0
        double cond = 0.0;
        double prev = 0.0;
        for (int st = i0; st <= n; ++st) {
            const double cd = detail::max_cdf(groups, i0, st);
            const double mass = cd - prev;
            prev = cd;
            if (st < n)
                cond += mass * out.per_state[std::size_t(st)];
            else if (!include_parent_hit && i0 == n)
                cond += detail::max_cdf(groups, i0, n - 1) * out.per_state[std::size_t(n)];
        }
        overall += w * cond;
    }
    out.overall = overall;
    return out;
}

}  // namespace evodyn
