#pragma once

// Optimal piecewise-linear epsilon-approximation of a sorted key -> position map.
//
// The builder keeps the upper and lower convex hulls of the points (x, y +- eps)
// seen so far together with the two extreme feasible lines (the "rectangle").
// A point is rejected as soon as no line can stab every vertical error bar,
// which makes the greedy left-to-right partition minimal in segment count.

#include "lidx/error.hpp"
#include "lidx/key.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

namespace lidx {

template <IndexKey K>
struct Segment {
    K first_key{};
    double slope = 0;     ///< positions per key unit
    double intercept = 0; ///< absolute position predicted at first_key
    std::size_t n_covered = 0;

    /// Unclamped, unrounded model value at `k`.
    double eval(K k) const noexcept {
        double dx;
        if constexpr (std::same_as<K, std::uint64_t>)
            dx = k >= first_key ? static_cast<double>(k - first_key) : -static_cast<double>(first_key - k);
        else
            dx = k - first_key;
        return slope * dx + intercept;
    }
};

template <IndexKey K>
struct PlaFit {
    std::vector<Segment<K>> segments;
    std::size_t epsilon = 1;
    std::size_t n_keys = 0;

    /// Index of the first position covered by segment `i`.
    std::size_t start_of(std::size_t i) const noexcept {
        std::size_t s = 0;
        for (std::size_t j = 0; j < i; ++j) s += segments[j].n_covered;
        return s;
    }
};

struct PlaStats {
    std::uint64_t points = 0;     ///< add_point calls
    std::uint64_t hull_steps = 0; ///< hull pops plus extreme-slope scan steps
    std::uint64_t refits = 0;     ///< segments cut back by post-hoc verification
};

/// Round half away from zero, clamped to [0, n_keys - 1]. Shared by fitting,
/// verification and every lookup path.
inline std::size_t clamp_round(double v, std::size_t n_keys) noexcept {
    if (n_keys == 0) return 0;
    const double r = std::round(v);
    if (!(r > 0)) return 0;
    if (r >= static_cast<double>(n_keys - 1)) return n_keys - 1;
    return static_cast<std::size_t>(r);
}

template <IndexKey K>
std::size_t segment_predict(const Segment<K> &seg, K k, std::size_t n_keys) noexcept {
    return clamp_round(seg.eval(k), n_keys);
}

namespace detail {

// Exact for integer keys (128-bit products), extended precision for reals.
template <IndexKey K>
using WideT = std::conditional_t<std::same_as<K, std::uint64_t>, __int128, long double>;

template <IndexKey K>
class HullBuilder {
    using W = WideT<K>;

    struct Slope {
        W dx{}, dy{};
        bool operator<(const Slope &o) const { return dy * o.dx < o.dy * dx; }
        bool operator>(const Slope &o) const { return dy * o.dx > o.dy * dx; }
        bool operator==(const Slope &o) const { return dy * o.dx == o.dy * dx; }
        long double value() const { return static_cast<long double>(dy) / static_cast<long double>(dx); }
    };

    struct Point {
        W x{}, y{};
        Slope operator-(const Point &o) const { return {x - o.x, y - o.y}; }
    };

    static W cross(const Point &o, const Point &a, const Point &b) {
        const Slope oa = a - o, ob = b - o;
        return oa.dx * ob.dy - oa.dy * ob.dx;
    }

public:
    HullBuilder(std::size_t epsilon, PlaStats *stats) : eps_(static_cast<W>(epsilon)), stats_(stats) {}

    void reset(K origin, std::size_t first_position) {
        origin_ = origin;
        base_pos_ = first_position;
        points_ = 0;
        upper_.clear();
        lower_.clear();
        upper_start_ = lower_start_ = 0;
    }

    std::size_t points() const noexcept { return points_; }

    /// Adds (k, position). Returns false, leaving the hull untouched, when the
    /// point cannot join the current segment.
    bool add_point(K k, std::size_t position) {
        if (stats_) ++stats_->points;
        const W x = offset(k);
        const W y = static_cast<W>(position - base_pos_);
        const Point p1{x, y + eps_}; // top of the error bar
        const Point p2{x, y - eps_}; // bottom
        if (points_ == 0) {
            rect_[0] = p1;
            rect_[1] = p2;
            upper_.assign(1, p1);
            lower_.assign(1, p2);
            upper_start_ = lower_start_ = 0;
            ++points_;
            return true;
        }
        if (points_ == 1) {
            rect_[2] = p2;
            rect_[3] = p1;
            upper_.push_back(p1);
            lower_.push_back(p2);
            ++points_;
            return true;
        }

        const Slope min_slope = rect_[2] - rect_[0];
        const Slope max_slope = rect_[3] - rect_[1];
        if ((p1 - rect_[2]) < min_slope || (p2 - rect_[3]) > max_slope) return false;

        if ((p1 - rect_[1]) < max_slope) {
            Slope best = lower_[lower_start_] - p1;
            std::size_t best_i = lower_start_;
            for (std::size_t i = lower_start_ + 1; i < lower_.size(); ++i) {
                tick();
                const Slope v = lower_[i] - p1;
                if (v > best) break;
                best = v;
                best_i = i;
            }
            rect_[1] = lower_[best_i];
            rect_[3] = p1;
            lower_start_ = best_i;

            std::size_t end = upper_.size();
            while (end >= upper_start_ + 2 && cross(upper_[end - 2], upper_[end - 1], p1) <= 0) {
                tick();
                --end;
            }
            upper_.resize(end);
            upper_.push_back(p1);
        }

        if ((p2 - rect_[0]) > min_slope) {
            Slope best = upper_[upper_start_] - p2;
            std::size_t best_i = upper_start_;
            for (std::size_t i = upper_start_ + 1; i < upper_.size(); ++i) {
                tick();
                const Slope v = upper_[i] - p2;
                if (v < best) break;
                best = v;
                best_i = i;
            }
            rect_[0] = upper_[best_i];
            rect_[2] = p2;
            upper_start_ = best_i;

            std::size_t end = lower_.size();
            while (end >= lower_start_ + 2 && cross(lower_[end - 2], lower_[end - 1], p2) >= 0) {
                tick();
                --end;
            }
            lower_.resize(end);
            lower_.push_back(p2);
        }
        ++points_;
        return true;
    }

    /// A line through the intersection of the two extreme lines, with the mean of
    /// their slopes (kept non-negative so predictions stay monotone in the key).
    Segment<K> segment() const {
        Segment<K> seg;
        seg.first_key = origin_;
        seg.n_covered = points_;
        if (points_ == 1) {
            seg.slope = 0;
            seg.intercept = static_cast<double>(base_pos_);
            return seg;
        }
        const Slope s_min = rect_[2] - rect_[0];
        const Slope s_max = rect_[3] - rect_[1];
        const long double lo = s_min.value();
        const long double hi = s_max.value();
        long double slope = (std::max<long double>(lo, 0) + hi) / 2;
        long double at_origin;
        if (s_min == s_max) {
            slope = hi;
            const long double a = wide(rect_[0].y) - slope * wide(rect_[0].x);
            const long double b = wide(rect_[1].y) - slope * wide(rect_[1].x);
            at_origin = (a + b) / 2;
        } else {
            const Slope p0p1 = rect_[1] - rect_[0];
            const long double den = wide(s_min.dx) * wide(s_max.dy) - wide(s_min.dy) * wide(s_max.dx);
            const long double t = (wide(p0p1.dx) * wide(s_max.dy) - wide(p0p1.dy) * wide(s_max.dx)) / den;
            const long double ix = wide(rect_[0].x) + t * wide(s_min.dx);
            const long double iy = wide(rect_[0].y) + t * wide(s_min.dy);
            at_origin = iy - slope * ix;
        }
        seg.slope = static_cast<double>(slope);
        seg.intercept = static_cast<double>(at_origin + static_cast<long double>(base_pos_));
        return seg;
    }

private:
    static long double wide(W v) { return static_cast<long double>(v); }

    W offset(K k) const { return static_cast<W>(k) - static_cast<W>(origin_); }

    void tick() {
        if (stats_) ++stats_->hull_steps;
    }

    W eps_;
    PlaStats *stats_;
    K origin_{};
    std::size_t base_pos_ = 0;
    std::size_t points_ = 0;
    Point rect_[4]{};
    std::vector<Point> upper_, lower_;
    std::size_t upper_start_ = 0, lower_start_ = 0;
};

template <IndexKey K>
void require_strictly_ascending(std::span<const K> keys) {
    for (std::size_t i = 1; i < keys.size(); ++i)
        if (!(keys[i - 1] < keys[i]))
            throw Error(ErrorCode::PreconditionViolation, "keys must be strictly ascending (index " +
                                                              std::to_string(i) + ")");
}

} // namespace detail

/// Minimal epsilon-PLA of keys[i] -> i. One pass; each segment is re-verified
/// against the rounded predictions and cut back at the first violation, which
/// only triggers on floating-point drift with real keys.
template <IndexKey K>
PlaFit<K> fit_segments(std::span<const K> keys, std::size_t epsilon, PlaStats *stats = nullptr) {
    if (epsilon < 1) throw Error(ErrorCode::PreconditionViolation, "epsilon must be >= 1");
    detail::require_strictly_ascending(keys);
    PlaFit<K> fit;
    fit.epsilon = epsilon;
    fit.n_keys = keys.size();
    detail::HullBuilder<K> hull(epsilon, stats);

    const auto violation = [&](const Segment<K> &seg, std::size_t from, std::size_t to) -> std::size_t {
        for (std::size_t p = from; p < to; ++p) {
            const std::size_t pred = segment_predict(seg, keys[p], keys.size());
            const std::size_t err = pred > p ? pred - p : p - pred;
            if (err > epsilon) return p;
        }
        return to;
    };

    std::size_t i = 0;
    while (i < keys.size()) {
        hull.reset(keys[i], i);
        std::size_t j = i;
        while (j < keys.size() && hull.add_point(keys[j], j)) ++j;
        Segment<K> seg = hull.segment();
        for (std::size_t bad = violation(seg, i, j); bad < j; bad = violation(seg, i, j)) {
            if (stats) ++stats->refits;
            j = std::max(bad, i + 1);
            hull.reset(keys[i], i);
            for (std::size_t p = i; p < j; ++p) hull.add_point(keys[p], p);
            seg = hull.segment();
        }
        fit.segments.push_back(seg);
        i = j;
    }
    return fit;
}

template <IndexKey K>
PlaFit<K> fit_segments(const std::vector<K> &keys, std::size_t epsilon, PlaStats *stats = nullptr) {
    return fit_segments(std::span<const K>(keys), epsilon, stats);
}

} // namespace lidx
