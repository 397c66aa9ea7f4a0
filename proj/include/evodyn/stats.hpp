#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace evodyn {

struct MeanSE {
    long long count = 0;
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSE mean_se(const std::vector<double>& xs) {
    MeanSE m;
    m.count = (long long)xs.size();
    if (xs.empty()) return m;
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.mean = sum / double(xs.size());
    if (xs.size() < 2) return m;
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
    return m;
}

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median_of: empty sample");
    std::sort(xs.begin(), xs.end());
    const std::size_t k = xs.size() / 2;
    return xs.size() % 2 ? xs[k] : 0.5 * (xs[k - 1] + xs[k]);
}

/// Exact (Clopper-Pearson) two-sided confidence interval for a binomial
/// proportion.
inline std::pair<double, double> clopper_pearson(long long successes, long long trials,
                                                 double confidence = 0.95) {
    if (trials <= 0) throw std::invalid_argument("clopper_pearson: no trials");
    if (successes < 0 || successes > trials)
        throw std::invalid_argument("clopper_pearson: successes outside [0, trials]");
    using bd = boost::math::binomial_distribution<double>;
    const double alpha = 1.0 - confidence;
    const double lo = bd::find_lower_bound_on_p(double(trials), double(successes), alpha / 2);
    const double hi = bd::find_upper_bound_on_p(double(trials), double(successes), alpha / 2);
    return {lo, hi};
}

inline double normal_quantile(double p) {
    boost::math::normal_distribution<double> d;
    return boost::math::quantile(d, p);
}

inline double chi_squared_quantile(double dof, double p) {
    boost::math::chi_squared_distribution<double> d(dof);
    return boost::math::quantile(d, p);
}

/// Least-squares slope and intercept of log2(y) against log2(x).
struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LogLogFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("loglog_fit: need at least two matched points");
    const double m = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::invalid_argument("loglog_fit: values must be positive");
        const double lx = std::log2(xs[i]);
        const double ly = std::log2(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    LogLogFit f;
    const double den = m * sxx - sx * sx;
    if (den == 0.0) throw std::invalid_argument("loglog_fit: degenerate x values");
    f.slope = (m * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / m;
    return f;
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities, pooling cells so every expected count reaches `min_expected`.
/// Returns {statistic, degrees of freedom}.
inline std::pair<double, int> chi_square_gof(const std::vector<long long>& observed,
                                             const std::vector<double>& expected_prob,
                                             double total, double min_expected = 5.0) {
    if (observed.size() != expected_prob.size())
        throw std::invalid_argument("chi_square_gof: size mismatch");
    double stat = 0.0;
    int cells = 0;
    double obs_pool = 0.0, exp_pool = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        obs_pool += double(observed[i]);
        exp_pool += expected_prob[i] * total;
        if (exp_pool >= min_expected) {
            stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
            ++cells;
            obs_pool = 0.0;
            exp_pool = 0.0;
        }
    }
    if (exp_pool > 0.0) {
        // Fold the tail remainder into the last cell.
        stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / std::max(exp_pool, 1e-12);
        ++cells;
    }
    return {stat, std::max(1, cells - 1)};
}

/// Two-sample chi-square homogeneity test over matched count vectors.
inline std::pair<double, int> chi_square_two_sample(const std::vector<long long>& a,
                                                    const std::vector<long long>& b,
                                                    double min_expected = 5.0) {
    if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
    double na = 0, nb = 0;
    for (auto v : a) na += double(v);
    for (auto v : b) nb += double(v);
    if (na <= 0 || nb <= 0) throw std::invalid_argument("chi_square_two_sample: empty sample");
    double stat = 0.0;
    int cells = 0;
    double pa = 0, pb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa += double(a[i]);
        pb += double(b[i]);
        const double tot = pa + pb;
        const double ea = tot * na / (na + nb);
        const double eb = tot * nb / (na + nb);
        if (ea >= min_expected && eb >= min_expected) {
            stat += (pa - ea) * (pa - ea) / ea + (pb - eb) * (pb - eb) / eb;
            ++cells;
            pa = pb = 0;
        }
    }
    if (pa + pb > 0) {
        const double tot = pa + pb;
        const double ea = tot * na / (na + nb);
        const double eb = tot * nb / (na + nb);
        if (ea > 0 && eb > 0) {
            stat += (pa - ea) * (pa - ea) / ea + (pb - eb) * (pb - eb) / eb;
            ++cells;
        }
    }
    return {stat, std::max(1, cells - 1)};
}

}  // namespace evodyn
