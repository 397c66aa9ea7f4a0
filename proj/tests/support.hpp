#pragma once

// Shared helpers for the test suites. Everything here is test-side oracle
// code: independent of the library paths it checks.

#include <bit>
#include <cstdint>
#include <vector>

#include "evodyn/genome.hpp"
#include "evodyn/random.hpp"

namespace testsupport {

/// Exhaustive 2^n enumeration of the bitwise mapping over matching counts:
/// from a state with `matching` bits agreeing, flip pattern `mask` turns
/// agreements into disagreements and vice versa. Reference oracle for the
/// binomial-convolution kernels.
inline std::vector<double> enumerate_flip_row(int n, int matching, double rate) {
    std::vector<double> row(std::size_t(n) + 1, 0.0);
    const std::uint64_t match_mask = (matching >= 64) ? ~0ull : ((1ull << matching) - 1);
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        const int flips = std::popcount(mask);
        double w = 1.0;
        for (int b = 0; b < flips; ++b) w *= rate;
        for (int b = 0; b < n - flips; ++b) w *= 1.0 - rate;
        const int lost = std::popcount(mask & match_mask);
        const int gained = flips - lost;
        row[std::size_t(matching - lost + gained)] += w;
    }
    return row;
}

/// Build a genome pair with an exact number of matching positions.
inline std::pair<evodyn::Genome, evodyn::Genome> genomes_with_matching(int n, int matching) {
    evodyn::Genome a(n), b(n);
    for (int i = matching; i < n; ++i) b.flip(i);
    return {a, b};
}

}  // namespace testsupport
