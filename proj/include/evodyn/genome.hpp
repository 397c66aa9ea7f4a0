#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "evodyn/random.hpp"

namespace evodyn {

/// Fixed-length bit string. Length is set at construction and never changes.
class Genome {
public:
    explicit Genome(int n) : n_(n), words_((word_count(n)), 0) {
        if (n <= 0) throw std::invalid_argument("Genome: problem size must be positive");
    }

    static Genome random(int n, RandomStream& g) {
        Genome x(n);
        for (auto& w : x.words_) w = g();
        x.mask_tail();
        return x;
    }

    int size() const { return n_; }

    bool bit(int i) const { return (words_[idx(i)] >> off(i)) & 1u; }

    void set(int i, bool v) {
        const std::uint64_t m = std::uint64_t{1} << off(i);
        if (v)
            words_[idx(i)] |= m;
        else
            words_[idx(i)] &= ~m;
    }

    void flip(int i) { words_[idx(i)] ^= std::uint64_t{1} << off(i); }

    /// Flip each bit independently with probability p.
    void flip_each(double p, RandomStream& g) {
        if (p <= 0.0) return;
        for (int i = 0; i < n_; ++i)
            if (g.uniform01() < p) flip(i);
    }

    int popcount() const {
        int c = 0;
        for (auto w : words_) c += std::popcount(w);
        return c;
    }

    bool operator==(const Genome& other) const = default;

    friend int hamming(const Genome& a, const Genome& b) {
        if (a.n_ != b.n_)
            throw std::invalid_argument("hamming: genome lengths differ");
        int d = 0;
        for (std::size_t k = 0; k < a.words_.size(); ++k)
            d += std::popcount(a.words_[k] ^ b.words_[k]);
        return d;
    }

private:
    static std::size_t word_count(int n) { return n <= 0 ? 1 : std::size_t(n + 63) / 64; }
    static std::size_t idx(int i) { return std::size_t(i) / 64; }
    static unsigned off(int i) { return unsigned(i) % 64; }

    void mask_tail() {
        const unsigned rem = unsigned(n_) % 64;
        if (rem != 0) words_.back() &= (std::uint64_t{1} << rem) - 1;
    }

    int n_;
    std::vector<std::uint64_t> words_;
};

/// Matching-bit summary of one tracked individual against the current
/// optimum. Valid only for fitness functions that depend on the matching
/// count alone.
struct CountState {
    int n;
    int matching;
};

inline void validate_count_state(const CountState& cs) {
    if (cs.n <= 0) throw std::invalid_argument("CountState: problem size must be positive");
    if (cs.matching < 0 || cs.matching > cs.n)
        throw std::invalid_argument("CountState: matching outside [0, n]");
}

}  // namespace evodyn
