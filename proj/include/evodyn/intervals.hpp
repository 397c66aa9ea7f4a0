#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "evodyn/problem.hpp"

namespace evodyn {

/// All interval formulas use base-2 logarithms.
inline double lg(double x) { return std::log2(x); }

/// γ(n, σ) = min{ n/log n, σ n²/log n }.
inline double gamma_value(int n, double sigma) {
    if (n < 2) throw std::invalid_argument("gamma_value: n must be at least 2");
    validate_shift_rate(sigma);
    const double l = lg(double(n));
    return std::min(double(n) / l, sigma * double(n) * double(n) / l);
}

/// G(n, σ) = γ^{4/7} log n.
inline double big_g_value(int n, double sigma) {
    return std::pow(gamma_value(n, sigma), 4.0 / 7.0) * lg(double(n));
}

enum class FirstLevel { LongJump1, Open1, Forbidden1 };
enum class SecondLevel { None, Forbidden2, Adjacent1, Adjacent2, LongJump2, Remote1, Remote2 };

inline const char* to_string(FirstLevel f) {
    switch (f) {
        case FirstLevel::LongJump1: return "L1";
        case FirstLevel::Open1: return "O1";
        case FirstLevel::Forbidden1: return "F1";
    }
    return "?";
}

inline const char* to_string(SecondLevel s) {
    switch (s) {
        case SecondLevel::None: return "-";
        case SecondLevel::Forbidden2: return "F2";
        case SecondLevel::Adjacent1: return "A1";
        case SecondLevel::Adjacent2: return "A2";
        case SecondLevel::LongJump2: return "L2";
        case SecondLevel::Remote1: return "B1";
        case SecondLevel::Remote2: return "B2";
    }
    return "?";
}

/// Two-level decomposition of the matching-count axis [0, n]:
/// first level F1 = [n - n/log3 n, n], L1 = [0, n/log2 n], O1 between;
/// second level F2 = [n-G, n], A1 = [n-2G, n-G), A2 = [n-3G, n-2G),
/// L2 = [0, 4G], B1 = (4G, 5G], B2 = (5G, 6G].
struct IntervalDecomposition {
    int n = 0;
    double sigma = 0.0;
    double gamma = 0.0;
    double G = 0.0;
    double f1_lo = 0.0;  // F1 = [f1_lo, n]
    double l1_hi = 0.0;  // L1 = [0, l1_hi]

    std::pair<FirstLevel, SecondLevel> classify(int matching) const {
        if (matching < 0 || matching > n)
            throw std::invalid_argument("classify: matching outside [0, n]");
        const double N = double(matching);
        FirstLevel first = FirstLevel::Open1;
        if (N >= f1_lo)
            first = FirstLevel::Forbidden1;
        else if (N <= l1_hi)
            first = FirstLevel::LongJump1;

        SecondLevel second = SecondLevel::None;
        if (N >= double(n) - G)
            second = SecondLevel::Forbidden2;
        else if (N >= double(n) - 2.0 * G)
            second = SecondLevel::Adjacent1;
        else if (N >= double(n) - 3.0 * G)
            second = SecondLevel::Adjacent2;
        else if (N <= 4.0 * G)
            second = SecondLevel::LongJump2;
        else if (N <= 5.0 * G)
            second = SecondLevel::Remote1;
        else if (N <= 6.0 * G)
            second = SecondLevel::Remote2;
        return {first, second};
    }
};

/// Build the decomposition, rejecting degenerate geometries with the
/// violated inequality in the message.
inline IntervalDecomposition decompose(int n, double sigma) {
    if (n < 2) throw std::invalid_argument("decompose: n must be at least 2");
    validate_shift_rate(sigma);
    IntervalDecomposition d;
    d.n = n;
    d.sigma = sigma;
    d.gamma = gamma_value(n, sigma);
    d.G = big_g_value(n, sigma);
    const double l = lg(double(n));
    d.f1_lo = double(n) - double(n) / (l * l * l);
    d.l1_hi = double(n) / (l * l);

    if (!(double(n) - 3.0 * d.G > 6.0 * d.G))
        throw std::invalid_argument(
            "decompose: degenerate decomposition, n - 3G > 6G violated (n=" + std::to_string(n) +
            ", G=" + std::to_string(d.G) + ")");
    if (!(d.l1_hi < d.f1_lo))
        throw std::invalid_argument(
            "decompose: degenerate decomposition, n/log^2 n < n - n/log^3 n violated (n=" +
            std::to_string(n) + ")");
    return d;
}

}  // namespace evodyn
