#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evodyn/kernels.hpp"
#include "evodyn/random.hpp"

namespace evodyn {

/// Observable signals a condition-variable scheme may consult. The true
/// matching count is withheld unless the scheme declares oracle access.
struct ConditionContext {
    int n = 0;
    long long t = 0;
    int lambda = 1;
    double parent_fitness = 0.0;
    std::optional<double> prev_parent_fitness;
    bool last_accepted = false;
    std::optional<int> oracle_matching;
};

/// A mutation-rate rule. Immutable after construction; rate() is pure given
/// its arguments plus the passed stream, so instances are safe to share
/// across concurrent runs.
class MutationScheme {
public:
    virtual ~MutationScheme() = default;

    const std::string& name() const { return name_; }
    bool is_oracle() const { return oracle_; }
    std::pair<double, double> declared_bounds() const { return {lo_, hi_}; }

    double rate(int n, long long t, int chi, const ConditionContext& ctx,
                RandomStream& g) const {
        const double r = rate_impl(n, t, chi, ctx, g);
        if (!(r >= lo_ - 1e-12 && r <= hi_ + 1e-12) || r < 0.0 || r > 1.0)
            throw std::logic_error("scheme '" + name_ + "' emitted rate " + std::to_string(r) +
                                   " outside declared bounds");
        return r;
    }

protected:
    MutationScheme(std::string name, bool oracle, double lo, double hi)
        : name_(std::move(name)), oracle_(oracle), lo_(lo), hi_(hi) {
        if (lo_ < 0.0 || hi_ > 1.0 || lo_ > hi_)
            throw std::invalid_argument("scheme declared_bounds outside [0,1] or inverted");
    }

    virtual double rate_impl(int n, long long t, int chi, const ConditionContext& ctx,
                             RandomStream& g) const = 0;

private:
    std::string name_;
    bool oracle_;
    double lo_, hi_;
};

using SchemePtr = std::shared_ptr<const MutationScheme>;

namespace detail {

inline std::string fmt_rate(double r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", r);
    return buf;
}

inline constexpr int kCycleGridPoints = 4;

/// Geometric grid lo..hi with endpoints pinned.
inline std::vector<double> make_cycle_grid(double lo, double hi) {
    std::vector<double> grid(kCycleGridPoints);
    for (int k = 0; k < kCycleGridPoints; ++k)
        grid[std::size_t(k)] = lo * std::pow(hi / lo, double(k) / double(kCycleGridPoints - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

class FixedScheme final : public MutationScheme {
public:
    explicit FixedScheme(double p)
        : MutationScheme("fixed(" + fmt_rate(p) + ")", false, p, p), p_(p) {}

protected:
    double rate_impl(int, long long, int, const ConditionContext&, RandomStream&) const override {
        return p_;
    }

private:
    double p_;
};

class BandedScheme final : public MutationScheme {
public:
    BandedScheme(double lo, double hi, std::string policy)
        : MutationScheme("banded(" + fmt_rate(lo) + ".." + fmt_rate(hi) + ";" + policy + ")",
                         false, lo, hi),
          lo_(lo),
          hi_(hi),
          log_uniform_(policy == "log-uniform"),
          grid_(make_cycle_grid(lo, hi)) {
        if (!(lo > 0.0) || lo > hi || hi > 1.0)
            throw std::invalid_argument("banded_scheme: need 0 < lo <= hi <= 1");
        if (policy != "cycle" && policy != "log-uniform")
            throw std::invalid_argument("banded_scheme: unknown policy '" + policy + "'");
    }

protected:
    double rate_impl(int, long long t, int chi, const ConditionContext& ctx,
                     RandomStream& g) const override {
        if (log_uniform_) {
            const double u = g.uniform01();
            return std::min(hi_, std::max(lo_, lo_ * std::pow(hi_ / lo_, u)));
        }
        return grid_[cycle_index(t, chi, ctx.lambda)];
    }

private:
    static std::size_t cycle_index(long long t, int chi, int lambda) {
        const long long idx = t * (long long)std::max(lambda, 1) + (chi - 1);
        return std::size_t(((idx % kCycleGridPoints) + kCycleGridPoints) % kCycleGridPoints);
    }

    double lo_, hi_;
    bool log_uniform_;
    std::vector<double> grid_;
};

class CappedScheme final : public MutationScheme {
public:
    CappedScheme(SchemePtr inner, double cap)
        : MutationScheme("capped(" + fmt_rate(cap) + ";" + inner->name() + ")",
                         inner->is_oracle(), std::min(inner->declared_bounds().first, cap),
                         std::min(inner->declared_bounds().second, cap)),
          inner_(std::move(inner)),
          cap_(cap) {
        if (!(cap > 0.0) || cap > 1.0)
            throw std::invalid_argument("capped_scheme: cap outside (0,1]");
    }

protected:
    double rate_impl(int n, long long t, int chi, const ConditionContext& ctx,
                     RandomStream& g) const override {
        return std::min(inner_->rate(n, t, chi, ctx, g), cap_);
    }

private:
    SchemePtr inner_;
    double cap_;
};

/// Per-generation greedy best-case adversary: picks from the menu the rate
/// maximizing the exact probability that some offspring strictly improves on
/// the (post-shift) parent matching count; on the optimum it maximizes the
/// probability that an offspring reproduces it. Choices only depend on
/// (n, lambda, state), so they are cached as a lookup table.
class OracleGreedyScheme final : public MutationScheme {
public:
    explicit OracleGreedyScheme(std::vector<double> menu)
        : MutationScheme(menu_name(menu), true,
                         *std::min_element(menu.begin(), menu.end()),
                         *std::max_element(menu.begin(), menu.end())),
          menu_(std::move(menu)) {
        for (double r : menu_)
            if (r < 0.0 || r > 1.0)
                throw std::invalid_argument("oracle_greedy_scheme: menu rate outside [0,1]");
    }

    const std::vector<double>& menu() const { return menu_; }

    double chosen_rate(int n, int lambda, int matching) const {
        const std::vector<double>& table = choices(n, lambda);
        return table[std::size_t(matching)];
    }

protected:
    double rate_impl(int n, long long, int, const ConditionContext& ctx,
                     RandomStream&) const override {
        if (!ctx.oracle_matching)
            throw std::logic_error("oracle_greedy scheme invoked without oracle_matching");
        // Hot path: the same table serves every offspring of every
        // generation, so keep a thread-local pointer to dodge the lock.
        thread_local std::uint64_t memo_id = 0;
        thread_local int memo_n = -1, memo_lambda = -1;
        thread_local const std::vector<double>* memo_table = nullptr;
        if (memo_id != instance_id_ || memo_n != n || memo_lambda != ctx.lambda) {
            memo_table = &choices(n, ctx.lambda);
            memo_id = instance_id_;
            memo_n = n;
            memo_lambda = ctx.lambda;
        }
        return (*memo_table)[std::size_t(*ctx.oracle_matching)];
    }

private:
    static std::uint64_t next_instance_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    static std::string menu_name(const std::vector<double>& menu) {
        if (menu.empty()) throw std::invalid_argument("oracle_greedy_scheme: empty menu");
        std::string s = "oracle_greedy(";
        for (std::size_t i = 0; i < menu.size(); ++i) {
            if (i) s += '|';
            s += fmt_rate(menu[std::size_t(i)]);
        }
        return s + ")";
    }

    const std::vector<double>& choices(int n, int lambda) const {
        const std::uint64_t key = (std::uint64_t(std::uint32_t(n)) << 32) | std::uint32_t(lambda);
        {
            std::shared_lock lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        std::vector<double> table = build_table(n, lambda);
        std::unique_lock lk(mu_);
        return cache_.emplace(key, std::move(table)).first->second;
    }

    std::vector<double> build_table(int n, int lambda) const {
        std::vector<double> table(std::size_t(n) + 1, menu_.front());
        std::vector<TransitionKernel> kernels;
        kernels.reserve(menu_.size());
        for (double r : menu_) kernels.push_back(mutate_kernel(n, r));
        for (int j = 0; j <= n; ++j) {
            // P(one offspring reaches >= target) from row j; target is j+1
            // below the optimum and n on it.
            const int target = std::min(j + 1, n);
            double best_obj = -1.0;
            double best_rate = menu_.front();
            for (std::size_t mi = 0; mi < menu_.size(); ++mi) {
                double tail = 0.0;
                for (int k = n; k >= target; --k) tail += kernels[mi].at(j, k);
                const double miss = std::max(0.0, 1.0 - tail);
                const double obj = 1.0 - std::pow(miss, double(lambda));
                if (obj > best_obj + 1e-15) {
                    best_obj = obj;
                    best_rate = menu_[mi];
                }
            }
            table[std::size_t(j)] = best_rate;
        }
        return table;
    }

    std::vector<double> menu_;
    const std::uint64_t instance_id_ = next_instance_id();
    mutable std::shared_mutex mu_;
    mutable std::map<std::uint64_t, std::vector<double>> cache_;
};

}  // namespace detail

inline SchemePtr fixed_scheme(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("fixed_scheme: p outside [0,1]");
    return std::make_shared<detail::FixedScheme>(p);
}

inline SchemePtr banded_scheme(double lo, double hi, const std::string& policy = "cycle") {
    return std::make_shared<detail::BandedScheme>(lo, hi, policy);
}

inline SchemePtr capped_scheme(SchemePtr inner, double cap) {
    if (!inner) throw std::invalid_argument("capped_scheme: null inner scheme");
    return std::make_shared<detail::CappedScheme>(std::move(inner), cap);
}

inline SchemePtr oracle_greedy_scheme(std::vector<double> menu) {
    return std::make_shared<detail::OracleGreedyScheme>(std::move(menu));
}

/// The per-offspring rate list the banded cycle policy emits at generation 0
/// (and, when the grid divides lambda, at every generation).
inline std::vector<double> banded_cycle_rates(double lo, double hi, int lambda) {
    const std::vector<double> grid = detail::make_cycle_grid(lo, hi);
    std::vector<double> out(static_cast<std::size_t>(lambda));
    for (int chi = 1; chi <= lambda; ++chi)
        out[std::size_t(chi - 1)] = grid[std::size_t((chi - 1) % detail::kCycleGridPoints)];
    return out;
}

}  // namespace evodyn
