#pragma once

#include "lidx/key.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace lidx {

// Fixed-size node accounting: header, B-1 key/payload pairs, B child pointers.
inline constexpr std::size_t kBTreeNodeHeaderBytes = 64;

/// Textbook B-tree with proactive splitting on the way down. A node has at most
/// B - 1 keys and, except the root, at least ceil(B/2) - 1.
template <IndexKey K>
class BTree {
    struct Node {
        std::vector<K> keys;
        std::vector<Payload> payloads;
        std::vector<std::unique_ptr<Node>> children; // empty for leaves
        std::size_t total = 0;                        // keys in the subtree
        bool leaf() const noexcept { return children.empty(); }
    };

public:
    explicit BTree(std::size_t branching = 64) : b_(std::max<std::size_t>(branching, 4)) {
        b_ += b_ % 2; // even B keeps both split halves at the minimum occupancy
        root_ = std::make_unique<Node>();
        nodes_ = 1;
    }

    std::size_t branching() const noexcept { return b_; }
    std::size_t size() const noexcept { return size_; }
    std::size_t node_count() const noexcept { return nodes_; }

    /// Levels on a root-to-leaf path.
    std::size_t height() const noexcept {
        std::size_t h = 1;
        for (const Node *n = root_.get(); !n->leaf(); n = n->children.front().get()) ++h;
        return h;
    }

    std::size_t memory_bytes() const noexcept {
        return nodes_ * (kBTreeNodeHeaderBytes + (b_ - 1) * (sizeof(K) + sizeof(Payload)) + b_ * sizeof(void *));
    }

    /// One op per node visited plus one per key comparison.
    SearchResult lookup(K k) const {
        SearchResult r;
        const Node *n = root_.get();
        std::size_t rank = 0;
        while (true) {
            ++r.ops;
            const std::size_t i = counted_lower_bound(n->keys, k, r.ops);
            if (i < n->keys.size()) {
                ++r.ops;
                if (n->keys[i] == k) {
                    r.found = true;
                    r.position = rank + subtree_rank(n, i) + (n->leaf() ? 0 : n->children[i]->total);
                    return r;
                }
            }
            if (n->leaf()) {
                r.position = rank + i;
                return r;
            }
            rank += subtree_rank(n, i);
            n = n->children[i].get();
        }
    }

    /// Returns false (no-op) for a key already present.
    bool insert(K k, Payload v) {
        if (contains(k)) return false;
        if (root_->keys.size() == b_ - 1) {
            auto grown = std::make_unique<Node>();
            grown->total = root_->total;
            grown->children.push_back(std::move(root_));
            root_ = std::move(grown);
            ++nodes_;
            split_child(*root_, 0);
        }
        Node *n = root_.get();
        while (!n->leaf()) {
            ++n->total;
            std::size_t i = static_cast<std::size_t>(std::lower_bound(n->keys.begin(), n->keys.end(), k) - n->keys.begin());
            if (n->children[i]->keys.size() == b_ - 1) {
                split_child(*n, i);
                if (n->keys[i] < k) ++i;
            }
            n = n->children[i].get();
        }
        const auto at = std::lower_bound(n->keys.begin(), n->keys.end(), k) - n->keys.begin();
        n->keys.insert(n->keys.begin() + at, k);
        n->payloads.insert(n->payloads.begin() + at, v);
        ++n->total;
        ++size_;
        return true;
    }

    bool contains(K k) const {
        const Node *n = root_.get();
        while (true) {
            const auto it = std::lower_bound(n->keys.begin(), n->keys.end(), k);
            if (it != n->keys.end() && *it == k) return true;
            if (n->leaf()) return false;
            n = n->children[static_cast<std::size_t>(it - n->keys.begin())].get();
        }
    }

    /// Key counts of all nodes in breadth-first order.
    std::vector<std::size_t> shape() const {
        std::vector<std::size_t> out;
        std::vector<const Node *> frontier{root_.get()};
        while (!frontier.empty()) {
            std::vector<const Node *> next;
            for (const Node *n : frontier) {
                out.push_back(n->keys.size());
                for (const auto &c : n->children) next.push_back(c.get());
            }
            frontier = std::move(next);
        }
        return out;
    }

    std::vector<K> keys_in_order() const {
        std::vector<K> out;
        out.reserve(size_);
        collect(root_.get(), out);
        return out;
    }

    /// True when leaves share one depth and every non-root node holds
    /// between ceil(B/2) - 1 and B - 1 keys in ascending order.
    bool balanced() const {
        std::size_t leaf_depth = 0;
        return check(root_.get(), 1, leaf_depth, true);
    }

private:
    static std::size_t counted_lower_bound(const std::vector<K> &a, K k, std::uint64_t &ops) {
        std::size_t lo = 0, hi = a.size();
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            ++ops;
            if (a[mid] < k) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

    // Keys stored before separator i of n. Used for the reported rank only; not
    // counted as ops.
    static std::size_t subtree_rank(const Node *n, std::size_t i) {
        std::size_t r = i;
        if (!n->leaf())
            for (std::size_t c = 0; c < i; ++c) r += n->children[c]->total;
        return r;
    }

    void split_child(Node &parent, std::size_t i) {
        Node &full = *parent.children[i];
        const std::size_t mid = full.keys.size() / 2;
        auto right = std::make_unique<Node>();
        right->keys.assign(full.keys.begin() + mid + 1, full.keys.end());
        right->payloads.assign(full.payloads.begin() + mid + 1, full.payloads.end());
        if (!full.leaf()) {
            for (std::size_t c = mid + 1; c < full.children.size(); ++c) right->children.push_back(std::move(full.children[c]));
            full.children.resize(mid + 1);
        }
        right->total = right->keys.size();
        for (const auto &c : right->children) right->total += c->total;
        full.total -= right->total + 1;
        parent.keys.insert(parent.keys.begin() + i, full.keys[mid]);
        parent.payloads.insert(parent.payloads.begin() + i, full.payloads[mid]);
        full.keys.resize(mid);
        full.payloads.resize(mid);
        parent.children.insert(parent.children.begin() + i + 1, std::move(right));
        ++nodes_;
    }

    static void collect(const Node *n, std::vector<K> &out) {
        for (std::size_t i = 0; i < n->keys.size(); ++i) {
            if (!n->leaf()) collect(n->children[i].get(), out);
            out.push_back(n->keys[i]);
        }
        if (!n->leaf()) collect(n->children.back().get(), out);
    }

    bool check(const Node *n, std::size_t depth, std::size_t &leaf_depth, bool is_root) const {
        const std::size_t min_keys = (b_ + 1) / 2 - 1;
        if (n->keys.size() > b_ - 1 || (!is_root && n->keys.size() < min_keys)) return false;
        if (!std::is_sorted(n->keys.begin(), n->keys.end())) return false;
        if (n->leaf()) {
            if (leaf_depth == 0) leaf_depth = depth;
            return leaf_depth == depth;
        }
        if (n->children.size() != n->keys.size() + 1) return false;
        for (const auto &c : n->children)
            if (!check(c.get(), depth + 1, leaf_depth, false)) return false;
        return true;
    }

    std::size_t b_;
    std::unique_ptr<Node> root_;
    std::size_t nodes_ = 0;
    std::size_t size_ = 0;
};

} // namespace lidx
