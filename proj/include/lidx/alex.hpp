#pragma once

// ALEX-style updatable learned index.
//
// Keys are mapped once to a 64-bit fixed-point fraction u of the root key range.
// Every node covers a dyadic interval [base, base + 2^(64 - bits)) of u, inner
// nodes hold 2^r child pointers over equal-width cells, and a child referenced
// by a block of b pointers covers exactly that block's cells. Because ranges are
// dyadic, pointer doubling and halving splits never move a key across a child
// boundary, and node ranges stay fixed for the lifetime of the node.

#include "lidx/error.hpp"
#include "lidx/key.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lidx {

struct AlexConfig {
    std::size_t max_node_bytes = 64 * 1024; ///< slot arrays of a leaf / pointer array of an inner node
    double d_lo = 0.6;
    double d_hi = 0.8;
    std::uint32_t shift_check_period = 64;
    double shift_threshold = 100;
    double cost_slack = 1.5;

    void validate() const {
        if (!(0 < d_lo && d_lo < d_hi && d_hi <= 1))
            throw Error(ErrorCode::PreconditionViolation, "density bounds must satisfy 0 < d_lo < d_hi <= 1");
        if (shift_check_period == 0) throw Error(ErrorCode::PreconditionViolation, "shift_check_period must be > 0");
        if (max_leaf_slots() < 16 || max_inner_len() < 2)
            throw Error(ErrorCode::PreconditionViolation, "max_node_bytes too small");
    }

    double d_init() const noexcept { return (d_lo + d_hi) / 2; }
    std::size_t max_leaf_slots() const noexcept { return max_node_bytes / kSlotBytes; }
    std::size_t max_inner_len() const noexcept { return std::bit_floor(max_node_bytes / kPointerBytes); }
    /// Largest key count a bulk-loaded leaf receives.
    std::size_t max_bulk_leaf_keys() const noexcept {
        return static_cast<std::size_t>(static_cast<double>(max_leaf_slots()) * d_init());
    }

    static constexpr std::size_t kSlotBytes = 16; ///< 8-byte key + 8-byte payload
    static constexpr std::size_t kPointerBytes = 8;
};

// Accounting model: a leaf costs header + 16 bytes per slot + its occupancy
// bitmap; an inner node costs header + 8 bytes per pointer.
inline constexpr std::size_t kAlexNodeHeaderBytes = 64;

inline std::size_t alex_leaf_bytes(std::size_t slots) {
    return kAlexNodeHeaderBytes + slots * AlexConfig::kSlotBytes + 8 * ((slots + 63) / 64);
}
inline std::size_t alex_inner_bytes(std::size_t len) { return kAlexNodeHeaderBytes + len * AlexConfig::kPointerBytes; }

enum class SplitDecision { No, Sideways, Downward };

/// Per-leaf insert statistics. Conditions (b) and (c) are sampled once per
/// window of shift_check_period inserts and hold until the next sample.
struct LeafStats {
    std::size_t count = 0;
    std::size_t capacity = 0;
    std::size_t max_capacity = 0;
    std::uint64_t window_inserts = 0;
    std::uint64_t window_shifts = 0;
    std::uint64_t window_cost = 0; ///< search probes + shifts
    double expected_cost = 0;      ///< per insert, fixed when the leaf is built
    bool shift_flag = false;
    bool cost_flag = false;
    std::uint64_t total_inserts = 0;
    std::uint64_t total_shifts = 0;

    double density() const noexcept { return capacity == 0 ? 1.0 : static_cast<double>(count) / capacity; }

    void record_insert(std::uint64_t probes, std::uint64_t shifts, const struct AlexConfig &cfg) {
        ++window_inserts;
        ++total_inserts;
        window_shifts += shifts;
        total_shifts += shifts;
        window_cost += probes + shifts;
        if (window_inserts >= cfg.shift_check_period) {
            const double n = static_cast<double>(window_inserts);
            shift_flag = static_cast<double>(window_shifts) / n > cfg.shift_threshold;
            cost_flag = static_cast<double>(window_cost) / n > cfg.cost_slack * expected_cost;
            window_inserts = window_shifts = window_cost = 0;
        }
    }
};

struct SplitConditions {
    bool dense = false;       ///< density >= d_hi
    bool at_capacity = false; ///< (a) cannot expand further
    bool over_cost = false;   ///< (b) empirical cost above expected * cost_slack
    bool shifty = false;      ///< (c) more than shift_threshold shifts per insert
    bool triggered() const noexcept { return at_capacity || over_cost || shifty; }
    bool wants_split() const noexcept { return dense && triggered(); }
};

inline SplitConditions split_conditions(const LeafStats &s, const AlexConfig &cfg) {
    SplitConditions c;
    c.dense = s.density() >= cfg.d_hi;
    c.at_capacity = s.capacity >= s.max_capacity;
    c.over_cost = s.cost_flag;
    c.shifty = s.shift_flag;
    return c;
}

struct SplitEvent {
    std::uint64_t leaf_id = 0;
    std::uint64_t parent_id = 0; ///< 0 when the leaf was the root
    std::size_t block = 0;       ///< pointers to the leaf before the split
    bool downward = false;
};

struct DoublingEvent {
    std::uint64_t node_id = 0;
    std::size_t old_len = 0;
    std::size_t new_len = 0;
};

struct InnerSplitEvent {
    std::uint64_t node_id = 0;
    std::uint64_t parent_id = 0;
    std::size_t len = 0;
};

struct AlexInsertReport {
    bool inserted = false;
    std::uint64_t shifts = 0;
    std::uint64_t ops = 0;
    std::size_t expansions = 0;
    std::vector<SplitEvent> splits;
    std::vector<DoublingEvent> doublings;
    std::vector<InnerSplitEvent> inner_splits;
    std::int64_t bytes_delta = 0;
};

struct AlexSearchResult : SearchResult {
    std::uint64_t leaf_id = 0;
    Payload payload = 0;
};

template <IndexKey K>
class AlexIndex {
    struct Node {
        Node(bool is_leaf, std::uint64_t id, std::uint64_t base, unsigned bits)
            : is_leaf(is_leaf), id(id), base(base), bits(bits) {}
        virtual ~Node() = default;
        bool is_leaf;
        std::uint64_t id;
        std::uint64_t base; ///< first u covered
        unsigned bits;      ///< node covers 2^(64 - bits) values of u
        std::size_t pool_slot = 0;
    };

    struct Leaf final : Node {
        using Node::Node;
        std::vector<K> keys; ///< gaps hold a copy of the next occupied key
        std::vector<Payload> payloads;
        std::vector<std::uint64_t> occupied;
        K origin{};
        long double slope = 0;
        long double intercept = 0;
        LeafStats stats;
        std::size_t capacity() const noexcept { return keys.size(); }
    };

    struct Inner final : Node {
        using Node::Node;
        std::vector<Node *> children;
        unsigned log_len = 0;
        std::size_t len() const noexcept { return children.size(); }
    };

    struct Step {
        Inner *node;
        std::size_t slot;
    };
    using Path = std::vector<Step>;

public:
    explicit AlexIndex(AlexConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    AlexIndex(const AlexIndex &) = delete;
    AlexIndex &operator=(const AlexIndex &) = delete;
    AlexIndex(AlexIndex &&) noexcept = default;
    AlexIndex &operator=(AlexIndex &&) noexcept = default;

    /// Builds the tree over sorted distinct keys. The root range is fixed here to
    /// [min, max] padded by 1% of the span on both sides.
    void bulk_load(std::span<const K> keys, std::span<const Payload> payloads = {}) {
        for (std::size_t i = 1; i < keys.size(); ++i)
            if (!(keys[i - 1] < keys[i])) throw Error(ErrorCode::PreconditionViolation, "bulk_load keys must be strictly ascending");
        if (!payloads.empty() && payloads.size() != keys.size())
            throw Error(ErrorCode::PreconditionViolation, "payload count differs from key count");
        if (keys.empty()) throw Error(ErrorCode::PreconditionViolation, "bulk_load needs at least one key to fix the root range");
        clear();
        set_root_range(keys.front(), keys.back());
        std::vector<std::uint64_t> us(keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) us[i] = to_u(keys[i]);
        std::vector<Payload> pays(payloads.begin(), payloads.end());
        if (pays.empty()) {
            pays.resize(keys.size());
            for (std::size_t i = 0; i < keys.size(); ++i) pays[i] = i;
        }
        root_ = build_subtree(keys, pays, us, 0, keys.size(), 0, 0);
        size_ = keys.size();
    }

    void bulk_load(const std::vector<K> &keys) { bulk_load(std::span<const K>(keys)); }

    const AlexConfig &config() const noexcept { return cfg_; }
    std::size_t size() const noexcept { return size_; }
    K root_lo() const noexcept { return lo_; }
    K root_hi() const noexcept { return hi_; }
    bool in_root_range(K k) const noexcept { return root_ && !(k < lo_) && k < hi_; }

    /// Running total of bytes under the accounting model.
    std::size_t memory_bytes() const noexcept { return bytes_; }

    AlexSearchResult lookup(K k) const {
        AlexSearchResult r;
        if (!in_root_range(k)) {
            r.ops = 1;
            return r;
        }
        const std::uint64_t u = to_u(k);
        const Node *n = root_;
        while (!n->is_leaf) {
            const auto *in = static_cast<const Inner *>(n);
            ++r.ops;
            n = in->children[child_slot(*in, u)];
        }
        const auto &leaf = *static_cast<const Leaf *>(n);
        r.leaf_id = leaf.id;
        ++r.ops;
        const std::size_t p = lower_bound_from(leaf, k, predict(leaf, k), r.ops);
        const std::size_t b = next_occupied(leaf, p);
        r.position = b;
        if (b < leaf.capacity() && leaf.keys[b] == k) {
            r.found = true;
            r.payload = leaf.payloads[b];
        }
        return r;
    }

    AlexInsertReport insert(K k, Payload payload) {
        AlexInsertReport rep;
        if (!in_root_range(k)) throw Error(ErrorCode::OutOfRootRange, "key outside the fixed root range");
        const std::size_t bytes_before = bytes_;
        const std::uint64_t u = to_u(k);
        Path path;
        Node *n = root_;
        while (!n->is_leaf) {
            auto *in = static_cast<Inner *>(n);
            const std::size_t s = child_slot(*in, u);
            path.push_back({in, s});
            ++rep.ops;
            n = in->children[s];
        }
        auto *leaf = static_cast<Leaf *>(n);
        std::uint64_t probes = 1;
        const std::size_t p = lower_bound_from(*leaf, k, predict(*leaf, k), probes);
        rep.ops += probes;
        const std::size_t b = next_occupied(*leaf, p);
        if (b < leaf->capacity() && leaf->keys[b] == k) return rep;

        rep.shifts = place(*leaf, k, payload, p, b);
        leaf->stats.count += 1;
        leaf->stats.record_insert(probes, rep.shifts, cfg_);
        ++size_;
        rep.inserted = true;

        if (leaf->stats.density() >= cfg_.d_hi) {
            const SplitConditions c = split_conditions(leaf->stats, cfg_);
            if (c.triggered() || !expand(*leaf, rep)) split(std::move(path), leaf, rep);
        }
        rep.bytes_delta = static_cast<std::int64_t>(bytes_) - static_cast<std::int64_t>(bytes_before);
        return rep;
    }

    /// Sideways when the leaf has duplicate pointers or some ancestor can make
    /// room; Downward only once the whole ancestor chain is saturated.
    SplitDecision should_split(K k) const {
        if (!in_root_range(k)) return SplitDecision::No;
        auto [path, leaf] = descend(to_u(k));
        if (!split_conditions(leaf->stats, cfg_).wants_split()) return SplitDecision::No;
        return sideways_possible(path) ? SplitDecision::Sideways : SplitDecision::Downward;
    }

    /// Statistics of the leaf that `k` routes to.
    LeafStats leaf_stats(K k) const { return descend(to_u(k)).second->stats; }

    /// Longest root-to-leaf path, in edges.
    std::size_t depth() const { return root_ ? depth_of(root_) : 0; }

    std::size_t leaf_count() const { return count_nodes(true); }
    std::size_t inner_count() const { return count_nodes(false); }

    /// Bytes recomputed from the live structure; equals memory_bytes().
    std::size_t recount_bytes() const {
        std::size_t total = 0;
        for (const auto &node : pool_) total += node_bytes(*node);
        return total;
    }

    /// Every stored key in ascending order.
    std::vector<K> keys_in_order() const {
        std::vector<K> out;
        out.reserve(size_);
        if (root_) collect(root_, out);
        return out;
    }

    /// Leaf densities (count / capacity) paired with key counts.
    std::vector<std::pair<double, std::size_t>> leaf_densities() const {
        std::vector<std::pair<double, std::size_t>> out;
        for (const auto &node : pool_)
            if (node->is_leaf) {
                const auto &l = static_cast<const Leaf &>(*node);
                out.emplace_back(l.stats.density(), l.stats.count);
            }
        return out;
    }

    /// Checks every structural invariant; returns an empty string when all hold.
    std::string validate() const {
        if (!root_) return pool_.empty() ? "" : "orphan nodes without a root";
        std::string err;
        std::size_t reachable = 0;
        std::size_t keys = 0;
        check_node(root_, err, reachable, keys);
        if (err.empty() && reachable != pool_.size()) err = "unreachable nodes in pool";
        if (err.empty() && keys != size_) err = "key count mismatch";
        if (err.empty() && recount_bytes() != bytes_) err = "byte accounting drifted";
        return err;
    }

    /// u-coordinate of a key, exposed for tests of the routing arithmetic.
    std::uint64_t to_u(K k) const {
        if constexpr (std::same_as<K, std::uint64_t>) {
            const unsigned __int128 off = static_cast<unsigned __int128>(k - lo_) << 64;
            const unsigned __int128 q = off / width_;
            return q > std::numeric_limits<std::uint64_t>::max() ? std::numeric_limits<std::uint64_t>::max()
                                                                 : static_cast<std::uint64_t>(q);
        } else {
            const long double t = (static_cast<long double>(k) - static_cast<long double>(lo_)) / width_;
            const long double scaled = std::floor(t * 18446744073709551616.0L);
            if (!(scaled > 0)) return 0;
            if (scaled >= 18446744073709551615.0L) return std::numeric_limits<std::uint64_t>::max();
            return static_cast<std::uint64_t>(scaled);
        }
    }

private:
    using Width = std::conditional_t<std::same_as<K, std::uint64_t>, unsigned __int128, long double>;

    static constexpr K sentinel() {
        if constexpr (std::same_as<K, double>) return std::numeric_limits<double>::infinity();
        else return std::numeric_limits<std::uint64_t>::max();
    }

    void clear() {
        pool_.clear();
        root_ = nullptr;
        bytes_ = 0;
        size_ = 0;
    }

    void set_root_range(K min, K max) {
        if constexpr (std::same_as<K, std::uint64_t>) {
            const std::uint64_t span = max - min;
            const std::uint64_t pad = std::max<std::uint64_t>(span / 100, 1);
            lo_ = min > pad ? min - pad : 0;
            const std::uint64_t room = std::numeric_limits<std::uint64_t>::max() - max;
            hi_ = room > pad ? max + pad + 1 : std::numeric_limits<std::uint64_t>::max();
            width_ = static_cast<unsigned __int128>(hi_ - lo_);
        } else {
            double pad = (max - min) / 100;
            if (!(pad > 0)) pad = std::max(std::abs(min) * 1e-6, 1.0);
            lo_ = min - pad;
            hi_ = max + pad;
            width_ = static_cast<long double>(hi_) - static_cast<long double>(lo_);
        }
    }

    // ---- node pool -------------------------------------------------------

    template <typename T>
    T *adopt(std::unique_ptr<T> node) {
        T *raw = node.get();
        raw->pool_slot = pool_.size();
        bytes_ += node_bytes(*raw);
        pool_.push_back(std::move(node));
        return raw;
    }

    void release(Node *node) {
        bytes_ -= node_bytes(*node);
        const std::size_t slot = node->pool_slot;
        if (slot + 1 != pool_.size()) {
            pool_[slot] = std::move(pool_.back());
            pool_[slot]->pool_slot = slot;
        }
        pool_.pop_back();
    }

    static std::size_t node_bytes(const Node &n) {
        if (n.is_leaf) return alex_leaf_bytes(static_cast<const Leaf &>(n).capacity());
        return alex_inner_bytes(static_cast<const Inner &>(n).len());
    }

    Inner *new_inner(std::uint64_t base, unsigned bits, unsigned log_len) {
        auto in = std::make_unique<Inner>(false, ++next_id_, base, bits);
        in->log_len = log_len;
        in->children.assign(std::size_t{1} << log_len, nullptr);
        return adopt(std::move(in));
    }

    // ---- routing ---------------------------------------------------------

    static std::size_t child_slot(const Inner &in, std::uint64_t u) {
        const unsigned shift = 64 - in.bits - in.log_len;
        return static_cast<std::size_t>((u - in.base) >> shift);
    }

    static std::uint64_t cell_base(const Inner &in, std::size_t slot) {
        const unsigned shift = 64 - in.bits - in.log_len;
        return in.base + (static_cast<std::uint64_t>(slot) << shift);
    }

    std::pair<Path, Leaf *> descend(std::uint64_t u) const {
        Path path;
        Node *n = root_;
        while (!n->is_leaf) {
            auto *in = static_cast<Inner *>(n);
            const std::size_t s = child_slot(*in, u);
            path.push_back({in, s});
            n = in->children[s];
        }
        return {std::move(path), static_cast<Leaf *>(n)};
    }

    static std::pair<std::size_t, std::size_t> block_of(const Inner &in, std::size_t slot) {
        const Node *child = in.children[slot];
        std::size_t lo = slot, hi = slot + 1;
        while (lo > 0 && in.children[lo - 1] == child) --lo;
        while (hi < in.len() && in.children[hi] == child) ++hi;
        return {lo, hi - lo};
    }

    // ---- leaves ----------------------------------------------------------

    std::size_t bounded_capacity(std::size_t count, double target_density) const {
        const std::size_t max_cap = cfg_.max_leaf_slots();
        if (count == 0) return std::min<std::size_t>(kEmptyLeafSlots, max_cap);
        const auto lo = static_cast<std::size_t>(std::ceil(static_cast<double>(count) / cfg_.d_hi));
        const auto hi = static_cast<std::size_t>(std::floor(static_cast<double>(count) / cfg_.d_lo));
        auto cap = static_cast<std::size_t>(std::llround(static_cast<double>(count) / target_density));
        cap = std::clamp(cap, std::max<std::size_t>(lo, count + 1), std::max(hi, count + 1));
        return std::min(cap, max_cap);
    }

    // Least-squares line through (key, rank), scaled from ranks to slots, then
    // model-based placement: each key at its predicted slot or the first free
    // slot to its right, leaving room for the keys still to come.
    Leaf *make_leaf(std::uint64_t base, unsigned bits, std::span<const K> keys, std::span<const Payload> pays,
                    std::size_t capacity) {
        auto leaf = std::make_unique<Leaf>(true, ++next_id_, base, bits);
        fill_leaf(*leaf, keys, pays, capacity);
        return adopt(std::move(leaf));
    }

    void fill_leaf(Leaf &leaf, std::span<const K> keys, std::span<const Payload> pays, std::size_t capacity) const {
        const std::size_t n = keys.size();
        leaf.keys.assign(capacity, sentinel());
        leaf.payloads.assign(capacity, 0);
        leaf.occupied.assign((capacity + 63) / 64, 0);
        leaf.origin = n ? keys.front() : K{};
        leaf.slope = 0;
        leaf.intercept = n ? static_cast<long double>(capacity) / 2 : 0;
        if (n >= 2) {
            long double mean_x = 0, mean_y = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mean_x += offset(leaf, keys[i]);
                mean_y += static_cast<long double>(i);
            }
            mean_x /= n;
            mean_y /= n;
            long double sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const long double dx = offset(leaf, keys[i]) - mean_x;
                sxx += dx * dx;
                sxy += dx * (static_cast<long double>(i) - mean_y);
            }
            const long double scale = static_cast<long double>(capacity) / n;
            const long double slope = sxx > 0 ? sxy / sxx : 0;
            leaf.slope = slope * scale;
            leaf.intercept = (mean_y - slope * mean_x) * scale;
        }
        long double err_cost = 0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pred = predict(leaf, keys[i]);
            std::size_t pos = pred;
            if (i > 0) pos = std::max(pos, last + 1);
            pos = std::min(pos, capacity - (n - i));
            leaf.keys[pos] = keys[i];
            leaf.payloads[pos] = pays[i];
            set_bit(leaf, pos);
            last = pos;
            const std::size_t err = pos > pred ? pos - pred : pred - pos;
            err_cost += 2 * std::bit_width(err) + 1;
        }
        K next = sentinel();
        for (std::size_t j = capacity; j-- > 0;) {
            if (test_bit(leaf, j)) next = leaf.keys[j];
            else leaf.keys[j] = next;
        }
        leaf.stats = LeafStats{};
        leaf.stats.count = n;
        leaf.stats.capacity = capacity;
        leaf.stats.max_capacity = cfg_.max_leaf_slots();
        const double d = capacity ? static_cast<double>(n) / capacity : 0;
        leaf.stats.expected_cost = (n ? static_cast<double>(err_cost / n) : 1.0) + (d < 1 ? d / (1 - d) : 1.0);
    }

    static long double offset(const Leaf &leaf, K k) {
        return static_cast<long double>(k) - static_cast<long double>(leaf.origin);
    }

    static std::size_t predict(const Leaf &leaf, K k) {
        const std::size_t cap = leaf.capacity();
        if (cap == 0) return 0;
        const long double v = std::round(leaf.slope * offset(leaf, k) + leaf.intercept);
        if (!(v > 0)) return 0;
        if (v >= static_cast<long double>(cap - 1)) return cap - 1;
        return static_cast<std::size_t>(v);
    }

    static bool test_bit(const Leaf &l, std::size_t i) { return (l.occupied[i / 64] >> (i % 64)) & 1u; }
    static void set_bit(Leaf &l, std::size_t i) { l.occupied[i / 64] |= std::uint64_t{1} << (i % 64); }

    /// First occupied slot >= i, or capacity.
    static std::size_t next_occupied(const Leaf &l, std::size_t i) {
        const std::size_t cap = l.capacity();
        if (i >= cap) return cap;
        std::size_t w = i / 64;
        std::uint64_t word = l.occupied[w] & (~std::uint64_t{0} << (i % 64));
        while (word == 0) {
            if (++w == l.occupied.size()) return cap;
            word = l.occupied[w];
        }
        return std::min(cap, w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
    }

    /// First free slot >= i, or capacity.
    static std::size_t next_free(const Leaf &l, std::size_t i) {
        const std::size_t cap = l.capacity();
        if (i >= cap) return cap;
        std::size_t w = i / 64;
        std::uint64_t word = ~l.occupied[w] & (~std::uint64_t{0} << (i % 64));
        while (word == 0) {
            if (++w == l.occupied.size()) return cap;
            word = ~l.occupied[w];
        }
        return std::min(cap, w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
    }

    /// Last free slot <= i, or npos.
    static std::size_t prev_free(const Leaf &l, std::size_t i) {
        constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
        std::size_t w = i / 64;
        const unsigned bit = i % 64;
        std::uint64_t mask = bit == 63 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (bit + 1)) - 1);
        std::uint64_t word = ~l.occupied[w] & mask;
        while (word == 0) {
            if (w == 0) return npos;
            word = ~l.occupied[--w];
        }
        return w * 64 + 63 - static_cast<std::size_t>(std::countl_zero(word));
    }

    /// First slot whose stored value is >= k, found by exponential search
    /// outward from `p`. Every key comparison counts one op.
    static std::size_t lower_bound_from(const Leaf &leaf, K k, std::size_t p, std::uint64_t &ops) {
        const auto &a = leaf.keys;
        const std::size_t n = a.size();
        if (n == 0) return 0;
        std::size_t lo, hi; // answer lies in [lo, hi]
        ++ops;
        if (a[p] < k) {
            std::size_t step = 1, last_less = p;
            while (true) {
                const std::size_t probe = p + step;
                if (probe >= n) {
                    lo = last_less + 1;
                    hi = n;
                    break;
                }
                ++ops;
                if (!(a[probe] < k)) {
                    lo = last_less + 1;
                    hi = probe;
                    break;
                }
                last_less = probe;
                step *= 2;
            }
        } else {
            std::size_t step = 1, first_ge = p;
            while (true) {
                if (step > p) {
                    lo = 0;
                    hi = first_ge;
                    break;
                }
                const std::size_t probe = p - step;
                ++ops;
                if (a[probe] < k) {
                    lo = probe + 1;
                    hi = first_ge;
                    break;
                }
                first_ge = probe;
                step *= 2;
            }
        }
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            ++ops;
            if (a[mid] < k) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

    // Inserts k given p = lower_bound (slot p-1, if any, holds a smaller key) and
    // b = first occupied slot >= p. Returns the number of keys moved.
    std::uint64_t place(Leaf &leaf, K k, Payload v, std::size_t p, std::size_t b) const {
        const std::size_t cap = leaf.capacity();
        if (p < b) {
            // free run [p, b): take the slot nearest the prediction
            const std::size_t slot = std::clamp(predict(leaf, k), p, b - 1);
            leaf.keys[slot] = k;
            leaf.payloads[slot] = v;
            set_bit(leaf, slot);
            for (std::size_t j = p; j < slot; ++j) leaf.keys[j] = k;
            return 0;
        }
        constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
        const std::size_t right = next_free(leaf, b);
        const std::size_t left = p == 0 ? npos : prev_free(leaf, p - 1);
        const std::size_t right_cost = right < cap ? right - b : npos;
        const std::size_t left_cost = left != npos ? p - 1 - left : npos;
        if (right_cost == npos && left_cost == npos)
            throw Error(ErrorCode::PreconditionViolation, "leaf has no free slot");
        if (right_cost <= left_cost) {
            for (std::size_t j = right; j > b; --j) {
                leaf.keys[j] = leaf.keys[j - 1];
                leaf.payloads[j] = leaf.payloads[j - 1];
            }
            set_bit(leaf, right);
            leaf.keys[b] = k;
            leaf.payloads[b] = v;
            return right_cost;
        }
        for (std::size_t j = left; j + 1 < p; ++j) {
            leaf.keys[j] = leaf.keys[j + 1];
            leaf.payloads[j] = leaf.payloads[j + 1];
        }
        set_bit(leaf, left);
        leaf.keys[p - 1] = k;
        leaf.payloads[p - 1] = v;
        return left_cost;
    }

    void extract(const Leaf &leaf, std::vector<K> &keys, std::vector<Payload> &pays) const {
        keys.clear();
        pays.clear();
        keys.reserve(leaf.stats.count);
        pays.reserve(leaf.stats.count);
        for (std::size_t i = next_occupied(leaf, 0); i < leaf.capacity(); i = next_occupied(leaf, i + 1)) {
            keys.push_back(leaf.keys[i]);
            pays.push_back(leaf.payloads[i]);
        }
    }

    /// Grows the leaf to density d_lo and retrains it. False when it is already
    /// as large as a node may be.
    bool expand(Leaf &leaf, AlexInsertReport &rep) {
        const std::size_t cap = bounded_capacity(leaf.stats.count, cfg_.d_lo);
        if (cap <= leaf.capacity()) return false;
        std::vector<K> keys;
        std::vector<Payload> pays;
        extract(leaf, keys, pays);
        bytes_ -= node_bytes(leaf);
        fill_leaf(leaf, keys, pays, cap);
        bytes_ += node_bytes(leaf);
        ++rep.expansions;
        return true;
    }

    bool overfull(const Leaf &leaf) const {
        return leaf.stats.density() >= cfg_.d_hi && leaf.capacity() >= cfg_.max_leaf_slots();
    }

    // ---- splits ----------------------------------------------------------

    bool can_double(const Inner &in) const {
        return in.len() * 2 <= cfg_.max_inner_len() && in.bits + in.log_len + 1 <= 64;
    }

    // Can the child at path[i].slot get a block of at least two pointers?
    bool room_possible(const Path &path, std::size_t i) const {
        const Inner &in = *path[i].node;
        if (block_of(in, path[i].slot).second >= 2) return true;
        if (can_double(in)) return true;
        if (in.bits + in.log_len + 1 > 64) return false; // halves could not double either
        if (i == 0) return false;
        return room_possible(path, i - 1);
    }

    bool sideways_possible(const Path &path) const { return !path.empty() && room_possible(path, path.size() - 1); }

    void double_inner(Inner &in, AlexInsertReport &rep) {
        const std::size_t old_len = in.len();
        std::vector<Node *> grown(old_len * 2);
        for (std::size_t i = 0; i < old_len; ++i) grown[2 * i] = grown[2 * i + 1] = in.children[i];
        bytes_ -= node_bytes(in);
        in.children = std::move(grown);
        in.log_len += 1;
        bytes_ += node_bytes(in);
        rep.doublings.push_back({in.id, old_len, in.len()});
    }

    // Ensures the child at path[i].slot owns >= 2 pointers, doubling path[i] or,
    // once it is saturated, splitting it sideways inside its own parent first.
    void make_room(Path &path, std::size_t i, AlexInsertReport &rep) {
        Inner *in = path[i].node;
        if (block_of(*in, path[i].slot).second >= 2) return;
        if (!can_double(*in)) {
            make_room(path, i - 1, rep);
            Inner *parent = path[i - 1].node;
            const auto [start, len] = block_of(*parent, path[i - 1].slot);
            const std::size_t half = in->len() / 2;
            Inner *left = new_inner(in->base, in->bits + 1, in->log_len - 1);
            Inner *right = new_inner(in->base + (std::uint64_t{1} << (64 - in->bits - 1)), in->bits + 1, in->log_len - 1);
            std::copy(in->children.begin(), in->children.begin() + half, left->children.begin());
            std::copy(in->children.begin() + half, in->children.end(), right->children.begin());
            for (std::size_t j = 0; j < len / 2; ++j) parent->children[start + j] = left;
            for (std::size_t j = len / 2; j < len; ++j) parent->children[start + j] = right;
            rep.inner_splits.push_back({in->id, parent->id, in->len()});
            const bool goes_left = path[i].slot < half;
            path[i].node = goes_left ? left : right;
            path[i].slot = goes_left ? path[i].slot : path[i].slot - half;
            path[i - 1].slot = goes_left ? start : start + len / 2;
            release(in);
            in = path[i].node;
        }
        double_inner(*in, rep);
        path[i].slot *= 2;
    }

    struct Work {
        Path path;
        Leaf *leaf;
    };

    void split(Path path, Leaf *leaf, AlexInsertReport &rep) {
        std::vector<Work> todo;
        todo.push_back({std::move(path), leaf});
        std::vector<K> keys;
        std::vector<Payload> pays;
        while (!todo.empty()) {
            Work w = std::move(todo.back());
            todo.pop_back();
            extract(*w.leaf, keys, pays);
            if (sideways_possible(w.path)) {
                make_room(w.path, w.path.size() - 1, rep);
                Inner *parent = w.path.back().node;
                const auto [start, len] = block_of(*parent, w.path.back().slot);
                const std::size_t mid = start + len / 2;
                rep.splits.push_back({w.leaf->id, parent->id, len, false});
                const std::uint64_t right_base = cell_base(*parent, mid);
                const std::size_t cut = partition_point(keys, right_base);
                const unsigned bits = w.leaf->bits + 1;
                Leaf *l = make_leaf(w.leaf->base, bits, std::span(keys).first(cut), std::span(pays).first(cut),
                                    bounded_capacity(cut, cfg_.d_init()));
                Leaf *r = make_leaf(right_base, bits, std::span(keys).subspan(cut), std::span(pays).subspan(cut),
                                    bounded_capacity(keys.size() - cut, cfg_.d_init()));
                for (std::size_t j = start; j < mid; ++j) parent->children[j] = l;
                for (std::size_t j = mid; j < start + len; ++j) parent->children[j] = r;
                release(w.leaf);
                if (overfull(*l)) todo.push_back({w.path, l});
                if (overfull(*r)) {
                    Path p = w.path;
                    p.back().slot = mid;
                    todo.push_back({std::move(p), r});
                }
            } else {
                if (w.leaf->bits + 1 > 64) throw Error(ErrorCode::PreconditionViolation, "key resolution exhausted");
                const std::uint64_t parent_id = w.path.empty() ? 0 : w.path.back().node->id;
                rep.splits.push_back({w.leaf->id, parent_id, 1, true});
                Inner *in = new_inner(w.leaf->base, w.leaf->bits, 1);
                const std::uint64_t right_base = cell_base(*in, 1);
                const std::size_t cut = partition_point(keys, right_base);
                Leaf *l = make_leaf(in->base, in->bits + 1, std::span(keys).first(cut), std::span(pays).first(cut),
                                    bounded_capacity(cut, cfg_.d_init()));
                Leaf *r = make_leaf(right_base, in->bits + 1, std::span(keys).subspan(cut), std::span(pays).subspan(cut),
                                    bounded_capacity(keys.size() - cut, cfg_.d_init()));
                in->children[0] = l;
                in->children[1] = r;
                if (w.path.empty()) root_ = in;
                else w.path.back().node->children[w.path.back().slot] = in;
                release(w.leaf);
                Path base = w.path;
                base.push_back({in, 0});
                if (overfull(*l)) todo.push_back({base, l});
                if (overfull(*r)) {
                    base.back().slot = 1;
                    todo.push_back({std::move(base), r});
                }
            }
        }
    }

    std::size_t partition_point(const std::vector<K> &keys, std::uint64_t u_cut) const {
        return static_cast<std::size_t>(
            std::partition_point(keys.begin(), keys.end(), [&](K k) { return to_u(k) < u_cut; }) - keys.begin());
    }

    // ---- bulk load -------------------------------------------------------

    Node *build_subtree(std::span<const K> keys, std::span<const Payload> pays, const std::vector<std::uint64_t> &us,
                        std::size_t i, std::size_t j, std::uint64_t base, unsigned bits) {
        const std::size_t count = j - i;
        const std::size_t leaf_keys = cfg_.max_bulk_leaf_keys();
        if (count <= leaf_keys || bits >= 63)
            return make_leaf(base, bits, keys.subspan(i, count), pays.subspan(i, count),
                             bounded_capacity(count, cfg_.d_init()));
        // Aim for cells holding about a quarter of a full leaf, then merge
        // sparse neighbouring cells into shared children (duplicate pointers).
        const std::size_t want = std::bit_ceil((4 * count + leaf_keys - 1) / leaf_keys);
        std::size_t len = std::clamp<std::size_t>(want, 2, cfg_.max_inner_len());
        unsigned log_len = static_cast<unsigned>(std::countr_zero(len));
        while (bits + log_len > 64) --log_len;
        Inner *in = new_inner(base, bits, log_len);
        assign_block(*in, keys, pays, us, i, j, 0, in->len());
        return in;
    }

    void assign_block(Inner &in, std::span<const K> keys, std::span<const Payload> pays,
                      const std::vector<std::uint64_t> &us, std::size_t i, std::size_t j, std::size_t start,
                      std::size_t len) {
        const std::size_t count = j - i;
        const std::size_t leaf_keys = cfg_.max_bulk_leaf_keys();
        const std::uint64_t base = cell_base(in, start);
        const unsigned bits = in.bits + in.log_len - static_cast<unsigned>(std::countr_zero(len));
        Node *child = nullptr;
        if ((len > 1 && count <= leaf_keys / 2) || (len == 1 && count <= leaf_keys)) {
            child = make_leaf(base, bits, keys.subspan(i, count), pays.subspan(i, count),
                              bounded_capacity(count, cfg_.d_init()));
        } else if (len > 1) {
            const std::uint64_t mid_base = cell_base(in, start + len / 2);
            const auto mid = static_cast<std::size_t>(std::lower_bound(us.begin() + i, us.begin() + j, mid_base) - us.begin());
            assign_block(in, keys, pays, us, i, mid, start, len / 2);
            assign_block(in, keys, pays, us, mid, j, start + len / 2, len / 2);
            return;
        } else {
            child = build_subtree(keys, pays, us, i, j, base, bits);
        }
        for (std::size_t s = start; s < start + len; ++s) in.children[s] = child;
    }

    // ---- inspection ------------------------------------------------------

    std::size_t depth_of(const Node *n) const {
        if (n->is_leaf) return 0;
        const auto *in = static_cast<const Inner *>(n);
        std::size_t best = 0;
        const Node *prev = nullptr;
        for (const Node *c : in->children) {
            if (c == prev) continue;
            prev = c;
            best = std::max(best, depth_of(c));
        }
        return best + 1;
    }

    std::size_t count_nodes(bool leaves) const {
        std::size_t c = 0;
        for (const auto &n : pool_) c += n->is_leaf == leaves;
        return c;
    }

    void collect(const Node *n, std::vector<K> &out) const {
        if (n->is_leaf) {
            const auto &l = *static_cast<const Leaf *>(n);
            for (std::size_t i = next_occupied(l, 0); i < l.capacity(); i = next_occupied(l, i + 1))
                out.push_back(l.keys[i]);
            return;
        }
        const Node *prev = nullptr;
        for (const Node *c : static_cast<const Inner *>(n)->children) {
            if (c == prev) continue;
            prev = c;
            collect(c, out);
        }
    }

    void check_node(const Node *n, std::string &err, std::size_t &reachable, std::size_t &keys) const {
        if (!err.empty()) return;
        ++reachable;
        const std::uint64_t span_mask = n->bits == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << (64 - n->bits)) - 1;
        if (n->is_leaf) {
            const auto &l = *static_cast<const Leaf *>(n);
            std::size_t occupied = 0;
            bool have_prev = false;
            K prev{};
            K next_seen = sentinel();
            for (std::size_t s = l.capacity(); s-- > 0;) {
                if (!test_bit(l, s)) {
                    if (!(l.keys[s] == next_seen)) return void(err = "gap does not mirror next key in leaf " + std::to_string(l.id));
                    continue;
                }
                next_seen = l.keys[s];
            }
            for (std::size_t s = next_occupied(l, 0); s < l.capacity(); s = next_occupied(l, s + 1)) {
                const K k = l.keys[s];
                if (have_prev && !(prev < k)) return void(err = "leaf keys out of order in leaf " + std::to_string(l.id));
                const std::uint64_t u = to_u(k);
                if (u < n->base || u - n->base > span_mask) return void(err = "key outside leaf range in leaf " + std::to_string(l.id));
                prev = k;
                have_prev = true;
                ++occupied;
            }
            if (occupied != l.stats.count) return void(err = "leaf count mismatch");
            if (l.stats.count > 0 && l.stats.density() >= cfg_.d_hi) return void(err = "leaf density at or above d_hi");
            if (l.capacity() > cfg_.max_leaf_slots()) return void(err = "leaf exceeds max node size");
            keys += occupied;
            return;
        }
        const auto &in = *static_cast<const Inner *>(n);
        if (!std::has_single_bit(in.len()) || in.len() != (std::size_t{1} << in.log_len)) return void(err = "inner length not a power of two");
        if (in.len() > cfg_.max_inner_len()) return void(err = "inner exceeds max node size");
        std::size_t s = 0;
        while (s < in.len()) {
            const auto [start, len] = block_of(in, s);
            const Node *c = in.children[s];
            if (c == nullptr) return void(err = "null child");
            if (!std::has_single_bit(len) || start % len != 0) return void(err = "pointer block not an aligned power of two");
            const unsigned want_bits = in.bits + in.log_len - static_cast<unsigned>(std::countr_zero(len));
            if (c->bits != want_bits || c->base != cell_base(in, start))
                return void(err = "child range does not match its pointer block");
            check_node(c, err, reachable, keys);
            if (!err.empty()) return;
            s = start + len;
        }
        (void)span_mask;
    }

    static constexpr std::size_t kEmptyLeafSlots = 8;

    AlexConfig cfg_;
    K lo_{};
    K hi_{};
    Width width_{};
    Node *root_ = nullptr;
    std::vector<std::unique_ptr<Node>> pool_;
    std::size_t bytes_ = 0;
    std::size_t size_ = 0;
    std::uint64_t next_id_ = 0;
};

} // namespace lidx
