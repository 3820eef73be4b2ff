#include "lidx/datasets.hpp"
#include "lidx/oracles.hpp"
#include "lidx/pgm.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace lidx;

namespace {

template <typename K>
void expect_matches_binary_search(const StaticPgm<K> &idx, K probe) {
    const auto [found, pos] = oracle::sorted_lookup(std::span<const K>(idx.keys()), probe);
    const SearchResult r = idx.lookup(probe);
    ASSERT_EQ(r.found, found) << probe;
    ASSERT_EQ(r.position, pos) << probe;
    ASSERT_GT(r.ops, 0u);
    ASSERT_LE(r.ops, idx.ops_bound()) << probe;
    ASSERT_TRUE(idx.window_sound(probe)) << probe;
}

} // namespace

TEST(StaticPgm, UniformSpacingIsOneSegmentHeightTwo) {
    std::vector<std::uint64_t> keys(100000);
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = 1000 + 7 * i;
    const auto idx = pgm_build(keys, 64);
    EXPECT_EQ(idx.segment_count(), 1u);
    EXPECT_EQ(idx.height(), 2u);
}

TEST(StaticPgm, EmptyAndSingle) {
    const auto empty = pgm_build(std::vector<std::uint64_t>{}, 8);
    EXPECT_EQ(empty.height(), 1u);
    const SearchResult r = empty.lookup(5);
    EXPECT_FALSE(r.found);
    EXPECT_EQ(r.position, 0u);
    EXPECT_GT(r.ops, 0u);
    EXPECT_EQ(empty.memory_bytes(), kPgmHeaderBytes);

    const auto one = pgm_build(std::vector<double>{2.5}, 8);
    EXPECT_EQ(one.height(), 1u);
    EXPECT_EQ(one.segment_count(), 1u);
    EXPECT_TRUE(one.lookup(2.5).found);
    EXPECT_FALSE(one.lookup(3.0).found);
    EXPECT_EQ(one.lookup(3.0).position, 1u);
}

TEST(StaticPgm, EveryStoredKeyFoundAtItsPosition) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::mixture(5e6, 1e6, 50), 30000, 4);
    const auto idx = pgm_build(ds.keys, 16);
    for (std::size_t i = 0; i < ds.keys.size(); ++i) {
        const SearchResult r = idx.lookup(ds.keys[i]);
        ASSERT_TRUE(r.found);
        ASSERT_EQ(r.position, i);
    }
    const SearchResult below = idx.lookup(0);
    EXPECT_FALSE(below.found);
    EXPECT_EQ(below.position, 0u);
}

TEST(StaticPgm, RandomProbesMatchBinarySearch) {
    for (std::size_t eps : {1u, 4u, 32u, 128u}) {
        const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 50000, eps);
        const auto idx = pgm_build(ds.keys, eps);
        Rng rng(eps);
        for (int i = 0; i < 10000; ++i) expect_matches_binary_search(idx, rng.below(10000000));
    }
}

TEST(StaticPgm, RealKeysExhaustiveSmall) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto ds = gen_dataset<double>(DistSpec::normal(0, 1), 200 + seed * 13, seed);
        const auto idx = pgm_build(ds.keys, 1 + seed % 5);
        for (std::size_t i = 0; i < ds.keys.size(); ++i) {
            expect_matches_binary_search(idx, ds.keys[i]);
            if (i + 1 < ds.keys.size()) expect_matches_binary_search(idx, (ds.keys[i] + ds.keys[i + 1]) / 2);
        }
        expect_matches_binary_search(idx, -100.0);
        expect_matches_binary_search(idx, 100.0);
    }
}

TEST(StaticPgm, LevelsShrinkToOneSegment) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 100000, 12);
    const auto idx = pgm_build(ds.keys, 4);
    const auto &levels = idx.levels();
    ASSERT_FALSE(levels.empty());
    EXPECT_EQ(levels.back().segments.size(), 1u);
    for (std::size_t l = 1; l < levels.size(); ++l) EXPECT_LT(levels[l].segments.size(), levels[l - 1].segments.size());
    EXPECT_EQ(idx.height(), levels.size() + 1);
}

TEST(StaticPgm, HeightNonIncreasingInEpsilon) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 50000, seed);
        std::size_t prev = SIZE_MAX;
        for (std::size_t eps : {1u, 2u, 8u, 32u, 128u, 512u, 1024u}) {
            const std::size_t h = pgm_build(ds.keys, eps).height();
            EXPECT_LE(h, prev) << "seed " << seed << " eps " << eps;
            prev = h;
        }
    }
}

TEST(StaticPgm, OpsAreDeterministic) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 20000, 3);
    const auto a = pgm_build(ds.keys, 32), b = pgm_build(ds.keys, 32);
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const auto k = rng.below(10000000);
        EXPECT_EQ(a.lookup(k).ops, b.lookup(k).ops);
    }
}

TEST(StaticPgm, MemoryAccounting) {
    std::vector<std::uint64_t> keys(1 << 16);
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = 3 * i;
    const auto small = pgm_build(std::vector<std::uint64_t>(keys.begin(), keys.begin() + keys.size() / 2), 64);
    const auto large = pgm_build(keys, 64);
    EXPECT_GE(large.memory_bytes(), 8 * keys.size());
    EXPECT_LE(static_cast<double>(large.memory_bytes()), 2.2 * static_cast<double>(small.memory_bytes()));
    std::size_t want = kPgmHeaderBytes + 8 * keys.size();
    for (const auto &l : large.levels()) want += kPgmLevelHeaderBytes + kPgmSegmentBytes * l.segments.size();
    EXPECT_EQ(large.memory_bytes(), want);
}

TEST(StaticPgm, SeparateInternalEpsilon) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 100000, 6);
    const auto idx = pgm_build(ds.keys, 8, 2);
    EXPECT_EQ(idx.epsilon_internal(), 2u);
    for (std::size_t l = 1; l < idx.levels().size(); ++l) EXPECT_EQ(idx.levels()[l].epsilon, 2u);
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) expect_matches_binary_search(idx, rng.below(10000000));
}

TEST(DynamicPgm, FirstInsertLandsInSlotZero) {
    DynamicPgm<std::uint64_t> d(8);
    const auto rep = d.insert(42);
    EXPECT_TRUE(rep.inserted);
    EXPECT_EQ(rep.slot, 0);
    ASSERT_EQ(d.components().size(), 1u);
    ASSERT_TRUE(d.components()[0].has_value());
    EXPECT_EQ(d.components()[0]->size(), 1u);
    EXPECT_FALSE(d.insert(42).inserted);
    EXPECT_EQ(d.size(), 1u);
}

TEST(DynamicPgm, SlotsFollowBinaryDigits) {
    DynamicPgm<std::uint64_t> d(8);
    Rng rng(4);
    for (std::size_t n = 1; n <= 1100; ++n) {
        while (!d.insert(rng.below(1u << 30)).inserted) {
        }
        std::size_t total = 0;
        for (std::size_t i = 0; i < d.components().size(); ++i) {
            const bool bit = (n >> i) & 1;
            ASSERT_EQ(d.components()[i].has_value(), bit) << "n " << n << " slot " << i;
            if (bit) {
                ASSERT_EQ(d.components()[i]->size(), std::size_t{1} << i);
                total += d.components()[i]->size();
            }
        }
        ASSERT_EQ(total, n);
        if ((n & (n - 1)) == 0) EXPECT_EQ(d.components().size(), static_cast<std::size_t>(std::bit_width(n)));
    }
}

TEST(DynamicPgm, InterleavedInsertsMatchSet) {
    DynamicPgm<std::uint64_t> d(4);
    std::set<std::uint64_t> ref;
    Rng rng(10);
    for (int step = 0; step < 3000; ++step) {
        const auto k = rng.below(20000);
        EXPECT_EQ(d.insert(k).inserted, ref.insert(k).second);
        const auto probe = rng.below(20000);
        const auto r = d.lookup(probe);
        ASSERT_EQ(r.found, ref.contains(probe)) << probe;
        if (!r.found)
            ASSERT_EQ(r.position, static_cast<std::size_t>(std::distance(ref.begin(), ref.lower_bound(probe))));
    }
    for (auto k : ref) ASSERT_TRUE(d.lookup(k).found);
}

TEST(DynamicPgm, AbsentKeyOpsAreSumOverComponents) {
    DynamicPgm<std::uint64_t> d(4);
    for (std::uint64_t k = 0; k < 1000; ++k) d.insert(k * 10);
    const std::uint64_t probe = 5555;
    std::uint64_t sum = 0;
    for (const auto &c : d.components())
        if (c) sum += c->lookup(probe).ops;
    const auto r = d.lookup(probe);
    EXPECT_FALSE(r.found);
    EXPECT_EQ(r.ops, sum);
}

TEST(DynamicPgm, FoundFlagsAgreeWithStaticUnion) {
    DynamicPgm<std::uint64_t> d(16);
    Rng rng(8);
    std::vector<std::uint64_t> keys;
    for (int i = 0; i < 5000; ++i) {
        const auto k = rng.below(1u << 24);
        if (d.insert(k).inserted) keys.push_back(k);
    }
    std::sort(keys.begin(), keys.end());
    const auto whole = pgm_build(keys, 16);
    for (int i = 0; i < 10000; ++i) {
        const auto k = rng.below(1u << 24);
        ASSERT_EQ(d.lookup(k).found, whole.lookup(k).found);
    }
}

TEST(DynamicPgm, BulkLoadEquivalentToInserts) {
    std::vector<std::uint64_t> keys(1000);
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = i * i + 1;
    DynamicPgm<std::uint64_t> d(8);
    d.bulk_load(keys);
    EXPECT_EQ(d.size(), keys.size());
    for (std::size_t i = 0; i < d.components().size(); ++i) {
        EXPECT_EQ(d.components()[i].has_value(), static_cast<bool>((keys.size() >> i) & 1));
        if (d.components()[i]) EXPECT_EQ(d.components()[i]->size(), std::size_t{1} << i);
    }
    for (auto k : keys) ASSERT_TRUE(d.lookup(k).found);
    EXPECT_TRUE(d.insert(3).inserted);
    EXPECT_FALSE(d.insert(2).inserted);
    EXPECT_EQ(d.size(), keys.size() + 1);
    EXPECT_THROW(d.bulk_load({3, 2}), Error);
}

TEST(DynamicPgm, EmptyMemoryIsHeaderOnly) {
    DynamicPgm<double> d(8);
    EXPECT_EQ(d.memory_bytes(), kPgmDynHeaderBytes);
    EXPECT_EQ(d.height(), 1u);
    EXPECT_FALSE(d.lookup(1.0).found);
}

TEST(DynamicPgm, AmortizedInsertCostIsLogarithmic) {
    DynamicPgm<std::uint64_t> d(32);
    Rng rng(12);
    std::uint64_t ops = 0, inserted = 0;
    std::vector<double> ratios;
    for (std::uint64_t n = 1; n <= (1u << 15); ++n) {
        const auto rep = d.insert(rng());
        ops += rep.ops;
        inserted += rep.inserted;
        if (n >= 1024 && (n & (n - 1)) == 0)
            ratios.push_back(static_cast<double>(ops) / static_cast<double>(inserted) / std::log2(static_cast<double>(n)));
    }
    // per-insert cost divided by log2 n stays flat within a factor of 1.5
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    EXPECT_LT(*hi / *lo, 1.5);
}
