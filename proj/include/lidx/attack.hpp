#pragma once

#include "lidx/datasets.hpp"
#include "lidx/error.hpp"
#include "lidx/key.hpp"
#include "lidx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lidx {

// ---- ALEX memory blowup ----------------------------------------------------

template <IndexKey K>
struct AlexAttackConfig {
    std::size_t per_location = 10000; ///< inserts per guessed location
    K delta{};                        ///< spacing between consecutive keys
    K lo{};                           ///< range estimate
    K hi{};
    std::uint64_t total = 0; ///< keys to emit
    std::uint64_t seed = 0;

    static constexpr K default_delta() {
        if constexpr (std::same_as<K, double>) return 1e-13;
        else return 1;
    }

    void validate() const {
        if (per_location < 1) throw Error(ErrorCode::PreconditionViolation, "per_location must be >= 1");
        if (!(delta > K{})) throw Error(ErrorCode::PreconditionViolation, "delta must be positive");
        if (!(lo < hi)) throw Error(ErrorCode::PreconditionViolation, "range estimate must satisfy lo < hi");
        const long double width = static_cast<long double>(hi) - static_cast<long double>(lo);
        if (static_cast<long double>(per_location) * static_cast<long double>(delta) >= width)
            throw Error(ErrorCode::ClusterTooWide, "per_location * delta must be below the range width");
    }
};

/// Clusters of keys descending from a random start x0 by delta. A key equal to
/// an earlier emission, to a key in `existing`, or not representable (below the
/// key domain) is skipped and the cluster extends one step further, so every
/// cluster contributes per_location keys unless it runs out of room.
template <IndexKey K>
class AlexAttackStream {
public:
    explicit AlexAttackStream(AlexAttackConfig<K> cfg, std::span<const K> existing = {})
        : cfg_(cfg), existing_(existing), rng_(cfg.seed) {
        cfg_.validate();
    }

    std::optional<K> next() {
        while (emitted_ < cfg_.total) {
            if (clusters_ == 0 || in_cluster_ == cfg_.per_location || steps_ >= kMaxStepFactor * cfg_.per_location) start_cluster();
            const std::optional<K> k = at(steps_++);
            if (!k || seen_.contains(*k) || std::binary_search(existing_.begin(), existing_.end(), *k)) continue;
            seen_.insert(*k);
            ++in_cluster_;
            ++emitted_;
            return k;
        }
        return std::nullopt;
    }

    std::uint64_t clusters() const noexcept { return clusters_; }
    std::uint64_t emitted() const noexcept { return emitted_; }

    /// Starts the next cluster at a chosen x0 instead of a random one.
    void force_start(K x0) {
        ++clusters_;
        in_cluster_ = 0;
        steps_ = 0;
        x0_ = x0;
    }

private:
    static constexpr std::size_t kMaxStepFactor = 4;

    void start_cluster() {
        ++clusters_;
        in_cluster_ = 0;
        steps_ = 0;
        if constexpr (std::same_as<K, std::uint64_t>) x0_ = cfg_.lo + rng_.below(cfg_.hi - cfg_.lo);
        else x0_ = cfg_.lo + rng_.uniform() * (cfg_.hi - cfg_.lo);
    }

    std::optional<K> at(std::size_t i) const {
        if constexpr (std::same_as<K, std::uint64_t>) {
            const unsigned __int128 off = static_cast<unsigned __int128>(i) * cfg_.delta;
            if (off > x0_) return std::nullopt;
            return x0_ - static_cast<std::uint64_t>(off);
        } else {
            return static_cast<double>(static_cast<long double>(x0_) - static_cast<long double>(i) * cfg_.delta);
        }
    }

    AlexAttackConfig<K> cfg_;
    std::span<const K> existing_;
    Rng rng_;
    K x0_{};
    std::size_t in_cluster_ = 0;
    std::size_t steps_ = 0;
    std::uint64_t emitted_ = 0;
    std::uint64_t clusters_ = 0;
    std::unordered_set<K> seen_;
};

/// Splits `ds` into keys to bulk-load and a random held-out subset of `holdout` keys.
template <IndexKey K>
std::pair<Dataset<K>, std::vector<K>> split_holdout(const Dataset<K> &ds, std::size_t holdout, std::uint64_t seed) {
    if (holdout > ds.size()) throw Error(ErrorCode::InsufficientData, "holdout larger than dataset");
    Rng rng(seed);
    auto picks = sample_indices(ds.size(), holdout, rng);
    std::sort(picks.begin(), picks.end());
    Dataset<K> load;
    load.seed = ds.seed;
    load.keys.reserve(ds.size() - holdout);
    std::vector<K> held;
    held.reserve(holdout);
    std::size_t j = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (j < picks.size() && picks[j] == i) {
            held.push_back(ds.keys[i]);
            ++j;
        } else {
            load.keys.push_back(ds.keys[i]);
        }
    }
    return {std::move(load), std::move(held)};
}

/// Held-out keys first (a seeded shuffle of the first `total` of them), then
/// fresh keys uniform in [lo, hi], skipping anything already emitted or present.
template <IndexKey K>
class BenignStream {
public:
    BenignStream(std::vector<K> holdout, K lo, K hi, std::uint64_t total, std::uint64_t seed,
                 std::span<const K> existing = {})
        : held_(std::move(holdout)), lo_(lo), hi_(hi), total_(total), existing_(existing), rng_(seed) {
        if (hi_ < lo_) throw Error(ErrorCode::PreconditionViolation, "benign range must satisfy lo <= hi");
        if (held_.size() > total_) held_.resize(total_);
        std::shuffle(held_.begin(), held_.end(), rng_);
    }

    std::optional<K> next() {
        if (emitted_ == total_) return std::nullopt;
        if (emitted_ < held_.size()) {
            seen_.insert(held_[emitted_]);
            return held_[emitted_++];
        }
        for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
            K k;
            if constexpr (std::same_as<K, std::uint64_t>)
                k = hi_ - lo_ == std::numeric_limits<std::uint64_t>::max() ? rng_() : lo_ + rng_.below(hi_ - lo_ + 1);
            else k = lo_ + rng_.uniform() * (hi_ - lo_);
            if (seen_.contains(k) || std::binary_search(existing_.begin(), existing_.end(), k)) continue;
            seen_.insert(k);
            ++emitted_;
            return k;
        }
        throw Error(ErrorCode::DomainTooSmall, "benign key range exhausted");
    }

private:
    static constexpr std::size_t kMaxAttempts = 1 << 16;

    std::vector<K> held_;
    K lo_, hi_;
    std::uint64_t total_;
    std::span<const K> existing_;
    Rng rng_;
    std::uint64_t emitted_ = 0;
    std::unordered_set<K> seen_;
};

// ---- PGM distribution inference --------------------------------------------

struct ProbeStats {
    double mean_ops = 0;
    std::vector<std::uint64_t> per_key_ops;
    std::size_t height = 0;
};

/// Looks up each attacker key in `idx` (anything with lookup() and height()).
template <typename Index, IndexKey K>
ProbeStats pgm_probe(const Index &idx, std::span<const K> attacker_keys) {
    ProbeStats s;
    s.height = idx.height();
    s.per_key_ops.reserve(attacker_keys.size());
    for (K k : attacker_keys) {
        const SearchResult r = idx.lookup(k);
        if (!r.found) throw Error(ErrorCode::PreconditionViolation, "attacker key missing from the index");
        s.per_key_ops.push_back(r.ops);
    }
    if (!s.per_key_ops.empty())
        s.mean_ops = static_cast<double>(std::accumulate(s.per_key_ops.begin(), s.per_key_ops.end(), std::uint64_t{0})) /
                     static_cast<double>(s.per_key_ops.size());
    return s;
}

enum class Label { A, B };

inline const char *to_string(Label l) { return l == Label::A ? "A" : "B"; }

struct Calibration {
    double mean_a = 0, sd_a = 0;
    double mean_b = 0, sd_b = 0;
    double height_a = 0, height_b = 0;
    double threshold = 0; ///< midpoint of the two means
};

/// Summarizes probe stats of known-A and known-B instances.
Calibration calibrate(std::span<const ProbeStats> a, std::span<const ProbeStats> b);

/// Threshold on mean_ops. A probe exactly on the threshold is labelled by the
/// calibrated height it is closer to, A on a further tie.
Label pgm_classify(const ProbeStats &stats, const Calibration &cal);

} // namespace lidx
