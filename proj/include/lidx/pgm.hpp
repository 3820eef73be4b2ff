#pragma once

#include "lidx/key.hpp"
#include "lidx/pla.hpp"

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lidx {

// Memory accounting model shared by StaticPgm and DynamicPgm.
inline constexpr std::size_t kPgmHeaderBytes = 64;      ///< per static index
inline constexpr std::size_t kPgmLevelHeaderBytes = 24; ///< per segment level
inline constexpr std::size_t kPgmSegmentBytes = 32;     ///< first key, slope, intercept, start
inline constexpr std::size_t kPgmDynHeaderBytes = 64;   ///< dynamic container
inline constexpr std::size_t kPgmSlotBytes = 8;         ///< per component slot

/// Fixed per-level cost in the lookup bound: one model evaluation plus the extra
/// comparison a window of 2*eps + 2 entries can need over ceil(log2(2*eps + 1)).
inline constexpr std::uint64_t kPgmOpsPerLevel = 2;

inline std::uint64_t ceil_log2(std::uint64_t x) { return x <= 1 ? 0 : std::bit_width(x - 1); }

/// Multi-level PGM index. Level 0 approximates positions in the key array;
/// level l + 1 approximates positions in the first-key array of level l; the
/// top level holds one segment.
template <IndexKey K>
class StaticPgm {
public:
    struct Level {
        std::vector<Segment<K>> segments;
        std::vector<K> first_keys;      ///< the array the level above searches
        std::vector<std::size_t> starts; ///< first covered position, plus a sentinel
        std::size_t epsilon = 1;
    };

    StaticPgm() = default;

    /// `epsilon_internal` == 0 means "same as epsilon".
    StaticPgm(std::vector<K> keys, std::size_t epsilon, std::size_t epsilon_internal = 0, PlaStats *stats = nullptr)
        : data_(std::move(keys)), epsilon_(epsilon),
          epsilon_internal_(epsilon_internal == 0 ? epsilon : epsilon_internal) {
        if (data_.empty()) return;
        levels_.push_back(make_level(std::span<const K>(data_), epsilon_, stats));
        while (levels_.back().segments.size() > 1) {
            const auto &below = levels_.back().first_keys;
            levels_.push_back(make_level(std::span<const K>(below), epsilon_internal_, stats));
        }
    }

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t epsilon() const noexcept { return epsilon_; }
    std::size_t epsilon_internal() const noexcept { return epsilon_internal_; }
    const std::vector<K> &keys() const noexcept { return data_; }
    const std::vector<Level> &levels() const noexcept { return levels_; }
    std::size_t segment_count() const noexcept { return levels_.empty() ? 0 : levels_.front().segments.size(); }

    /// Segment levels plus the key array itself. An index over at most one key
    /// (including the empty index's synthetic root) has height 1.
    std::size_t height() const noexcept { return data_.size() <= 1 ? 1 : levels_.size() + 1; }

    /// Upper bound on lookup ops: height * (kPgmOpsPerLevel + ceil(log2(2 eps + 1))).
    std::uint64_t ops_bound() const noexcept {
        const std::size_t eps = std::max(epsilon_, epsilon_internal_);
        return height() * (kPgmOpsPerLevel + ceil_log2(2 * eps + 1));
    }

    SearchResult lookup(K k) const { return lookup_impl<false>(k, nullptr); }

    /// Same traversal, additionally checking at every level that the true
    /// position lies inside the searched window. Returns false on a violation.
    bool window_sound(K k) const {
        bool ok = true;
        lookup_impl<true>(k, &ok);
        return ok;
    }

    std::size_t memory_bytes() const noexcept {
        std::size_t bytes = kPgmHeaderBytes + sizeof(K) * data_.size();
        for (const auto &level : levels_) bytes += kPgmLevelHeaderBytes + kPgmSegmentBytes * level.segments.size();
        return bytes;
    }

private:
    static Level make_level(std::span<const K> keys, std::size_t eps, PlaStats *stats) {
        Level level;
        level.epsilon = eps;
        auto fit = fit_segments<K>(keys, eps, stats);
        level.segments = std::move(fit.segments);
        level.first_keys.reserve(level.segments.size());
        level.starts.reserve(level.segments.size() + 1);
        std::size_t start = 0;
        for (const auto &s : level.segments) {
            level.first_keys.push_back(s.first_key);
            level.starts.push_back(start);
            start += s.n_covered;
        }
        level.starts.push_back(start);
        return level;
    }

    // Prediction of segment `seg` of `level`, never past the next segment's start.
    static std::size_t predict(const Level &level, std::size_t seg, K k, std::size_t target_size) {
        const std::size_t p = clamp_round(level.segments[seg].eval(k), target_size);
        return std::min(p, level.starts[seg + 1]);
    }

    template <typename Cmp>
    static std::size_t counted_partition(std::span<const K> a, std::size_t lo, std::size_t hi, Cmp goes_left,
                                         std::uint64_t &ops) {
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            ++ops;
            if (goes_left(a[mid])) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

    template <bool Check>
    SearchResult lookup_impl(K k, bool *sound) const {
        SearchResult r;
        if (data_.empty()) {
            r.ops = 1; // synthetic root
            return r;
        }
        std::size_t seg = 0;
        for (std::size_t l = levels_.size() - 1; l >= 1; --l) {
            const Level &below = levels_[l - 1];
            const std::span<const K> arr(below.first_keys);
            const std::size_t eps = levels_[l].epsilon;
            const std::size_t p = predict(levels_[l], seg, k, arr.size());
            ++r.ops;
            const std::size_t lo = p > eps ? p - eps : 0;
            const std::size_t hi = std::min(arr.size(), p + eps + 2);
            const std::size_t ub = counted_partition(arr, lo, hi, [k](K x) { return !(k < x); }, r.ops);
            if constexpr (Check) {
                const auto true_ub = static_cast<std::size_t>(std::upper_bound(arr.begin(), arr.end(), k) - arr.begin());
                if (true_ub != ub) *sound = false;
            }
            seg = ub == 0 ? 0 : ub - 1;
        }
        const Level &bottom = levels_.front();
        const std::size_t p = predict(bottom, seg, k, data_.size());
        ++r.ops;
        const std::size_t lo = p > epsilon_ ? p - epsilon_ : 0;
        const std::size_t hi = std::min(data_.size(), p + epsilon_ + 2);
        const std::span<const K> arr(data_);
        const std::size_t pos = counted_partition(arr, lo, hi, [k](K x) { return x < k; }, r.ops);
        if constexpr (Check) {
            const auto true_lb = static_cast<std::size_t>(std::lower_bound(arr.begin(), arr.end(), k) - arr.begin());
            if (true_lb != pos) *sound = false;
        }
        r.position = pos;
        r.found = pos < data_.size() && data_[pos] == k;
        return r;
    }

    std::vector<K> data_;
    std::size_t epsilon_ = 64;
    std::size_t epsilon_internal_ = 64;
    std::vector<Level> levels_;
};

template <IndexKey K>
StaticPgm<K> pgm_build(std::vector<K> keys, std::size_t epsilon, std::size_t epsilon_internal = 0) {
    return StaticPgm<K>(std::move(keys), epsilon, epsilon_internal);
}

struct DynSearchResult : SearchResult {
    int slot = -1; ///< component holding the key, -1 if absent
};

struct PgmInsertReport {
    bool inserted = false; ///< false for a duplicate
    int slot = -1;         ///< slot the merged component landed in
    std::uint64_t ops = 0; ///< duplicate probe + merge moves + PLA work
};

/// Logarithmic-method container: slot i is empty or holds a StaticPgm over
/// exactly 2^i keys, so occupancy follows the binary digits of size().
template <IndexKey K>
class DynamicPgm {
public:
    explicit DynamicPgm(std::size_t epsilon = 64, std::size_t epsilon_internal = 0)
        : epsilon_(epsilon), epsilon_internal_(epsilon_internal) {}

    std::size_t size() const noexcept { return size_; }
    std::size_t epsilon() const noexcept { return epsilon_; }
    const std::vector<std::optional<StaticPgm<K>>> &components() const noexcept { return slots_; }

    /// Replaces the contents with sorted distinct `keys`, cut into consecutive
    /// runs sized by the binary digits of their count, largest run first.
    void bulk_load(std::vector<K> keys) {
        detail::require_strictly_ascending(std::span<const K>(keys));
        slots_.clear();
        size_ = keys.size();
        std::size_t from = 0;
        for (std::size_t i = std::bit_width(size_); i-- > 0;) {
            if (!((size_ >> i) & 1)) continue;
            if (slots_.size() <= i) slots_.resize(i + 1);
            const std::size_t len = std::size_t{1} << i;
            slots_[i].emplace(std::vector<K>(keys.begin() + from, keys.begin() + from + len), epsilon_, epsilon_internal_);
            from += len;
        }
    }

    /// Tallest occupied component; 1 when empty.
    std::size_t height() const noexcept {
        std::size_t h = 1;
        for (const auto &s : slots_)
            if (s) h = std::max(h, s->height());
        return h;
    }

    /// Searches occupied components from the largest down; the first hit wins.
    /// An absent key reports the sum of per-component insertion points, i.e.
    /// its rank among all stored keys.
    DynSearchResult lookup(K k) const {
        DynSearchResult out;
        std::size_t rank = 0;
        for (std::size_t i = slots_.size(); i-- > 0;) {
            if (!slots_[i]) continue;
            const SearchResult r = slots_[i]->lookup(k);
            out.ops += r.ops;
            if (r.found) {
                out.found = true;
                out.position = r.position;
                out.slot = static_cast<int>(i);
                return out;
            }
            rank += r.position;
        }
        out.position = rank;
        return out;
    }

    PgmInsertReport insert(K k) {
        PgmInsertReport rep;
        const DynSearchResult probe = lookup(k);
        rep.ops += probe.ops;
        if (probe.found) return rep;

        std::vector<K> carry{k};
        std::size_t i = 0;
        for (; i < slots_.size() && slots_[i]; ++i) {
            const auto &existing = slots_[i]->keys();
            std::vector<K> merged;
            merged.reserve(existing.size() + carry.size());
            std::merge(existing.begin(), existing.end(), carry.begin(), carry.end(), std::back_inserter(merged));
            rep.ops += merged.size();
            carry = std::move(merged);
            slots_[i].reset();
        }
        if (i == slots_.size()) slots_.emplace_back();
        PlaStats stats;
        slots_[i].emplace(std::move(carry), epsilon_, epsilon_internal_, &stats);
        rep.ops += stats.points + stats.hull_steps;
        rep.inserted = true;
        rep.slot = static_cast<int>(i);
        ++size_;
        return rep;
    }

    std::size_t memory_bytes() const noexcept {
        std::size_t bytes = kPgmDynHeaderBytes + kPgmSlotBytes * slots_.size();
        for (const auto &s : slots_)
            if (s) bytes += s->memory_bytes();
        return bytes;
    }

private:
    std::size_t epsilon_;
    std::size_t epsilon_internal_;
    std::size_t size_ = 0;
    std::vector<std::optional<StaticPgm<K>>> slots_;
};

} // namespace lidx
