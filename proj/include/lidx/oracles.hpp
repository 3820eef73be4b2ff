#pragma once

// Brute-force reference computations. Nothing here shares code with the index
// implementations it is used to check.

#include "lidx/error.hpp"
#include "lidx/key.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

namespace lidx::oracle {

inline constexpr std::size_t kMaxOracleKeys = 256;

namespace detail {

template <IndexKey K>
using Exact = std::conditional_t<std::same_as<K, std::uint64_t>, __int128, long double>;

// a/b vs c/d with b, d > 0
template <typename T>
bool frac_less(T a, T b, T c, T d) {
    return a * d < c * b;
}

// Is there a line y = s*x + t with |s*x_p + t - p| <= eps for every p in [i, j)?
// Equivalent to: max over pairs (p<q) of (q - p - 2eps)/(x_q - x_p) is at most
// min over pairs of (q - p + 2eps)/(x_q - x_p).
template <IndexKey K>
class IntervalFeasibility {
    using T = Exact<K>;

public:
    IntervalFeasibility(std::span<const K> keys, std::size_t eps) : keys_(keys), eps2_(2 * static_cast<T>(eps)) {}

    /// Largest j such that [i, j) is feasible.
    std::size_t max_end(std::size_t i) const {
        bool have = false;
        T lo_num{}, lo_den{1}, hi_num{}, hi_den{1};
        std::size_t j = i + 1;
        for (; j < keys_.size(); ++j) {
            for (std::size_t p = i; p < j; ++p) {
                const T dx = static_cast<T>(keys_[j]) - static_cast<T>(keys_[p]);
                const T dy = static_cast<T>(j - p);
                const T lo = dy - eps2_, hi = dy + eps2_;
                if (!have) {
                    lo_num = lo;
                    lo_den = dx;
                    hi_num = hi;
                    hi_den = dx;
                    have = true;
                    continue;
                }
                if (frac_less(lo_num, lo_den, lo, dx)) {
                    lo_num = lo;
                    lo_den = dx;
                }
                if (frac_less(hi, dx, hi_num, hi_den)) {
                    hi_num = hi;
                    hi_den = dx;
                }
            }
            if (frac_less(hi_num, hi_den, lo_num, lo_den)) return j;
        }
        return j;
    }

private:
    std::span<const K> keys_;
    T eps2_;
};

} // namespace detail

/// Exact minimum number of segments of any epsilon-PLA of keys[i] -> i, by
/// dynamic programming over split points with a pairwise-slope feasibility test.
template <IndexKey K>
std::size_t min_segments(std::span<const K> keys, std::size_t epsilon) {
    if (keys.size() > kMaxOracleKeys) throw Error(ErrorCode::OracleTooLarge, "oracle is capped at 256 keys");
    const std::size_t n = keys.size();
    if (n == 0) return 0;
    detail::IntervalFeasibility<K> feasible(keys, epsilon);
    std::vector<std::size_t> reach(n);
    for (std::size_t i = 0; i < n; ++i) reach[i] = feasible.max_end(i);
    constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(n + 1, inf);
    best[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (best[i] == inf) continue;
        for (std::size_t j = i + 1; j <= reach[i]; ++j) best[j] = std::min(best[j], best[i] + 1);
    }
    return best[n];
}

template <IndexKey K>
std::size_t min_segments(const std::vector<K> &keys, std::size_t epsilon) {
    return min_segments(std::span<const K>(keys), epsilon);
}

/// Plain binary search over a sorted array: (found, lower_bound position).
template <IndexKey K>
std::pair<bool, std::size_t> sorted_lookup(std::span<const K> sorted, K k) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), k);
    return {it != sorted.end() && *it == k, static_cast<std::size_t>(it - sorted.begin())};
}

/// Minimal number p of equal-width partitions of [lo, hi) such that no cell holds
/// more than `cap` keys. Scans p = 1, 2, ... and counts every cell. Before the
/// full count, each candidate is tested against the windows of cap + 1
/// consecutive keys with the smallest spans: a window inside one cell already
/// rules p out, which rejects most candidates without counting.
template <IndexKey K>
std::uint64_t min_equal_width_partitions(std::span<const K> sorted, K lo, K hi, std::uint64_t cap,
                                         std::uint64_t p_limit = std::uint64_t{1} << 20) {
    if (cap == 0) throw Error(ErrorCode::PreconditionViolation, "partition capacity must be positive");
    if (!(lo < hi)) throw Error(ErrorCode::PreconditionViolation, "partition range must satisfy lo < hi");
    const long double width = static_cast<long double>(hi) - static_cast<long double>(lo);
    const auto cell_of = [&](K k, std::uint64_t p) {
        const long double off = static_cast<long double>(k) - static_cast<long double>(lo);
        auto cell = static_cast<std::uint64_t>(off / width * static_cast<long double>(p));
        return cell >= p ? p - 1 : cell;
    };

    constexpr std::size_t kProbeWindows = 64;
    std::vector<std::size_t> tight;
    if (sorted.size() > cap) {
        tight.resize(sorted.size() - cap);
        for (std::size_t i = 0; i < tight.size(); ++i) tight[i] = i;
        const auto span_of = [&](std::size_t i) {
            return static_cast<long double>(sorted[i + cap]) - static_cast<long double>(sorted[i]);
        };
        const std::size_t keep = std::min(kProbeWindows, tight.size());
        std::partial_sort(tight.begin(), tight.begin() + static_cast<std::ptrdiff_t>(keep), tight.end(),
                          [&](std::size_t a, std::size_t b) { return span_of(a) < span_of(b); });
        tight.resize(keep);
    }

    std::vector<std::uint64_t> counts;
    for (std::uint64_t p = 1; p <= p_limit; ++p) {
        bool ok = true;
        for (std::size_t i : tight)
            if (cell_of(sorted[i], p) == cell_of(sorted[i + cap], p)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        counts.assign(p, 0);
        for (K k : sorted)
            if (++counts[cell_of(k, p)] > cap) {
                ok = false;
                break;
            }
        if (ok) return p;
    }
    throw Error(ErrorCode::OracleTooLarge, "partition count exceeds oracle limit");
}

/// Smallest d with m^d >= p, i.e. ceil(log_m p), computed with integers.
inline std::uint64_t ceil_log(std::uint64_t m, std::uint64_t p) {
    std::uint64_t d = 0;
    unsigned __int128 acc = 1;
    while (acc < p) {
        acc *= m;
        ++d;
    }
    return d;
}

} // namespace lidx::oracle
