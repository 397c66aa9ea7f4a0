#pragma once

#include <cstdint>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace evodyn {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; applied to distinct inputs it behaves as a keyed
// counter generator.
inline constexpr std::uint64_t sm_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t key_chain(std::uint64_t h, std::uint64_t v) {
    return sm_mix(h ^ (sm_mix(v + kGolden) + (h << 6) + (h >> 2)));
}
}  // namespace detail

/// Counter-based random stream. The key identifies the stream; successive
/// outputs are the SplitMix64 sequence for that key. Copyable value type,
/// no hidden state beyond (key, counter).
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream() = default;
    explicit RandomStream(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }

    result_type operator()() { return detail::sm_mix(key_ + (++ctr_) * detail::kGolden); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
};

/// Stream roles used by the engine. Every random decision of a run flows
/// through a stream derived from (seed, replication, generation, role),
/// so runs replay identically under any execution order.
enum class StreamRole : std::uint64_t { Init = 1, Shift = 2, Mutation = 3 };

inline RandomStream stream_for(std::uint64_t seed, std::uint64_t replication,
                               std::uint64_t generation, StreamRole role,
                               std::uint64_t chi = 0) {
    using namespace detail;
    std::uint64_t h = sm_mix(seed ^ 0x8f1bbcdcbfa53e0bULL);
    h = key_chain(h, replication);
    h = key_chain(h, generation);
    h = key_chain(h, (static_cast<std::uint64_t>(role) << 32) | chi);
    return RandomStream(h);
}

/// Exact Binomial(trials, p) draw by CDF inversion. O(trials·p) expected;
/// fine for one-off use. Hot loops should go through BinomialTable.
inline int binomial_draw(int trials, double p, RandomStream& g) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    if (p > 0.5) return trials - binomial_draw(trials, 1.0 - p, g);
    const double u = g.uniform01();
    double pmf = std::exp(double(trials) * std::log1p(-p));
    double cdf = pmf;
    const double ratio = p / (1.0 - p);
    int k = 0;
    while (u >= cdf && k < trials) {
        ++k;
        pmf *= ratio * double(trials - k + 1) / double(k);
        cdf += pmf;
    }
    return k;
}

/// Precomputed binomial CDF rows for every trial count 0..n at one fixed
/// rate. One uniform + binary search per draw.
class BinomialTable {
public:
    BinomialTable(int n, double p) : n_(n), p_(p) {
        if (n < 0) throw std::invalid_argument("BinomialTable: negative trial count");
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("BinomialTable: rate outside [0,1]");
        reflected_ = p_ > 0.5;
        const double q = reflected_ ? 1.0 - p_ : p_;
        degenerate_ = (q <= 0.0);
        if (degenerate_) return;
        cdf_.resize(static_cast<std::size_t>(n) + 1);
        const double ratio = q / (1.0 - q);
        for (int m = 0; m <= n; ++m) {
            auto& row = cdf_[static_cast<std::size_t>(m)];
            row.resize(static_cast<std::size_t>(m) + 1);
            double pmf = std::exp(double(m) * std::log1p(-q));
            double acc = pmf;
            row[0] = acc;
            for (int k = 1; k <= m; ++k) {
                pmf *= ratio * double(m - k + 1) / double(k);
                acc += pmf;
                row[static_cast<std::size_t>(k)] = acc;
            }
        }
    }

    int trials_max() const { return n_; }
    double rate() const { return p_; }

    int draw(int m, RandomStream& g) const {
        if (m <= 0) return 0;
        if (degenerate_) return reflected_ ? m : 0;
        const auto& row = cdf_[static_cast<std::size_t>(m)];
        const double u = g.uniform01();
        int lo = 0, hi = m;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (row[static_cast<std::size_t>(mid)] <= u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return reflected_ ? m - lo : lo;
    }

private:
    int n_;
    double p_;
    bool reflected_ = false;
    bool degenerate_ = false;
    std::vector<std::vector<double>> cdf_;
};

/// Per-run cache of BinomialTable instances keyed by exact rate value. A
/// small linear memo fronts the map: runs touch only a handful of rates but
/// query them millions of times.
class BinomialTableCache {
public:
    explicit BinomialTableCache(int n) : n_(n) {}

    const BinomialTable& table(double rate) {
        for (int k = 0; k < memo_size_; ++k)
            if (memo_rate_[k] == rate) return *memo_tab_[k];
        const std::uint64_t key = key_of(rate);
        auto it = tables_.find(key);
        if (it == tables_.end())
            it = tables_.emplace(key, std::make_unique<BinomialTable>(n_, rate)).first;
        const BinomialTable* t = it->second.get();
        const int slot = memo_size_ < kMemoCap ? memo_size_++ : (memo_rr_++ % kMemoCap);
        memo_rate_[slot] = rate;
        memo_tab_[slot] = t;
        return *t;
    }

private:
    static std::uint64_t key_of(double rate) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(rate));
        __builtin_memcpy(&bits, &rate, sizeof(bits));
        return bits;
    }

    static constexpr int kMemoCap = 12;
    int n_;
    int memo_size_ = 0;
    unsigned memo_rr_ = 0;
    double memo_rate_[kMemoCap] = {};
    const BinomialTable* memo_tab_[kMemoCap] = {};
    std::unordered_map<std::uint64_t, std::unique_ptr<BinomialTable>> tables_;
};

}  // namespace evodyn
