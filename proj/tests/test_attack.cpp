#include "lidx/attack.hpp"
#include "lidx/btree.hpp"
#include "lidx/pgm.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>

using namespace lidx;

namespace {

template <typename K>
std::vector<K> drain(AlexAttackStream<K> &s) {
    std::vector<K> out;
    while (auto k = s.next()) out.push_back(*k);
    return out;
}

} // namespace

TEST(AlexAttackStream, ClusterDescendsFromStart) {
    AlexAttackConfig<std::uint64_t> cfg{3, 1, 0, 1000, 3, 1};
    AlexAttackStream<std::uint64_t> s(cfg);
    s.force_start(100);
    EXPECT_EQ(drain(s), (std::vector<std::uint64_t>{100, 99, 98}));
    EXPECT_EQ(s.clusters(), 1u);
}

TEST(AlexAttackStream, RedrawsAfterPerLocationKeys) {
    AlexAttackConfig<std::uint64_t> cfg{3, 1, 1000, 1000000, 12, 5};
    AlexAttackStream<std::uint64_t> s(cfg);
    const auto keys = drain(s);
    ASSERT_EQ(keys.size(), 12u);
    EXPECT_EQ(s.clusters(), 4u);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(keys[3 * c + 1], keys[3 * c] - 1);
        EXPECT_EQ(keys[3 * c + 2], keys[3 * c] - 2);
    }
}

TEST(AlexAttackStream, KeysStayNearTheRange) {
    AlexAttackConfig<double> cfg{1000, 1e-13, -2.0, 2.0, 20000, 9};
    AlexAttackStream<double> s(cfg);
    const auto keys = drain(s);
    ASSERT_EQ(keys.size(), 20000u);
    for (double k : keys) {
        EXPECT_GT(k, cfg.lo - 1000 * cfg.delta * 4);
        EXPECT_LT(k, cfg.hi);
    }
    EXPECT_EQ(std::set<double>(keys.begin(), keys.end()).size(), keys.size());
}

TEST(AlexAttackStream, SkipsExistingKeysWithoutShortfall) {
    const std::vector<std::uint64_t> existing{97, 99};
    AlexAttackConfig<std::uint64_t> cfg{3, 1, 0, 1000, 3, 1};
    AlexAttackStream<std::uint64_t> s(cfg, existing);
    s.force_start(100);
    EXPECT_EQ(drain(s), (std::vector<std::uint64_t>{100, 98, 96}));
}

TEST(AlexAttackStream, DeterministicPerSeed) {
    AlexAttackConfig<double> cfg{50, 1e-13, 0.0, 1.0, 500, 77};
    AlexAttackStream<double> a(cfg), b(cfg);
    EXPECT_EQ(drain(a), drain(b));
    cfg.seed = 78;
    AlexAttackStream<double> c(cfg);
    AlexAttackStream<double> a2(AlexAttackConfig<double>{50, 1e-13, 0.0, 1.0, 500, 77});
    EXPECT_NE(drain(c), drain(a2));
}

TEST(AlexAttackStream, RejectsClusterWiderThanRange) {
    AlexAttackConfig<std::uint64_t> cfg{100, 10, 0, 1000, 5, 1};
    try {
        AlexAttackStream<std::uint64_t> s(cfg);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ClusterTooWide);
    }
    AlexAttackConfig<double> zero{10, 0.0, 0.0, 1.0, 5, 1};
    EXPECT_THROW(AlexAttackStream<double>{zero}, Error);
}

TEST(BenignStream, HoldoutPrefixShuffled) {
    std::vector<std::uint64_t> held{10, 20, 30, 40, 50};
    BenignStream<std::uint64_t> s(held, 0, 100, 5, 3);
    std::vector<std::uint64_t> got;
    while (auto k = s.next()) got.push_back(*k);
    std::vector<std::uint64_t> sorted = got;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, held);

    BenignStream<std::uint64_t> again(held, 0, 100, 5, 3);
    std::vector<std::uint64_t> got2;
    while (auto k = again.next()) got2.push_back(*k);
    EXPECT_EQ(got, got2);
}

TEST(BenignStream, ExtendsWithFreshKeysInRange) {
    const std::vector<std::uint64_t> existing{1, 2, 3};
    BenignStream<std::uint64_t> s({5}, 0, 50, 40, 4, existing);
    std::set<std::uint64_t> seen;
    while (auto k = s.next()) {
        EXPECT_LE(*k, 50u);
        EXPECT_FALSE(std::binary_search(existing.begin(), existing.end(), *k));
        EXPECT_TRUE(seen.insert(*k).second);
    }
    EXPECT_EQ(seen.size(), 40u);

    BenignStream<std::uint64_t> tight({}, 0, 2, 5, 4);
    EXPECT_THROW(
        {
            while (tight.next()) {
            }
        },
        Error);
}

TEST(SplitHoldout, PartitionsTheDataset) {
    Dataset<std::uint64_t> ds;
    for (std::uint64_t k = 0; k < 100; ++k) ds.keys.push_back(k * 2);
    const auto [load, held] = split_holdout(ds, 10, 1);
    EXPECT_EQ(load.size(), 90u);
    EXPECT_EQ(held.size(), 10u);
    std::vector<std::uint64_t> all = load.keys;
    all.insert(all.end(), held.begin(), held.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, ds.keys);
    EXPECT_THROW(split_holdout(ds, 101, 1), Error);
}

TEST(PgmProbe, MeanOfPerKeyOps) {
    std::vector<std::uint64_t> keys;
    for (std::uint64_t k = 0; k < 5000; ++k) keys.push_back(k * k);
    const auto idx = pgm_build(keys, 8);
    const std::vector<std::uint64_t> probe{0, 100, 2500, 99 * 99, 4999ull * 4999};
    const auto s = pgm_probe(idx, std::span<const std::uint64_t>(probe));
    ASSERT_EQ(s.per_key_ops.size(), probe.size());
    const double mean =
        static_cast<double>(std::accumulate(s.per_key_ops.begin(), s.per_key_ops.end(), std::uint64_t{0})) / 5;
    EXPECT_DOUBLE_EQ(s.mean_ops, mean);
    EXPECT_EQ(s.height, idx.height());
    const auto again = pgm_probe(idx, std::span<const std::uint64_t>(probe));
    EXPECT_EQ(again.per_key_ops, s.per_key_ops);

    const std::vector<std::uint64_t> missing{3};
    EXPECT_THROW(pgm_probe(idx, std::span<const std::uint64_t>(missing)), Error);
}

TEST(PgmProbe, WorksOnBTree) {
    BTree<double> t(8);
    for (int i = 0; i < 100; ++i) t.insert(i * 0.5, 0);
    const std::vector<double> probe{0.5, 10.0};
    const auto s = pgm_probe(t, std::span<const double>(probe));
    EXPECT_EQ(s.height, t.height());
    EXPECT_GT(s.mean_ops, 0);
}

TEST(Classify, ThresholdAndTies) {
    ProbeStats a1{10, {}, 3}, a2{12, {}, 3}, b1{20, {}, 2}, b2{22, {}, 2};
    const std::vector<ProbeStats> as{a1, a2}, bs{b1, b2};
    const auto cal = calibrate(as, bs);
    EXPECT_DOUBLE_EQ(cal.mean_a, 11);
    EXPECT_DOUBLE_EQ(cal.mean_b, 21);
    EXPECT_DOUBLE_EQ(cal.threshold, 16);
    EXPECT_DOUBLE_EQ(cal.height_a, 3);
    EXPECT_EQ(pgm_classify(ProbeStats{11, {}, 3}, cal), Label::A);
    EXPECT_EQ(pgm_classify(ProbeStats{21, {}, 2}, cal), Label::B);
    EXPECT_EQ(pgm_classify(ProbeStats{16, {}, 2}, cal), Label::B);
    EXPECT_EQ(pgm_classify(ProbeStats{16, {}, 3}, cal), Label::A);
    EXPECT_STREQ(to_string(Label::B), "B");
}

TEST(Classify, EqualMeansAreAmbiguous) {
    const std::vector<ProbeStats> as{ProbeStats{10, {}, 2}}, bs{ProbeStats{10, {}, 2}};
    try {
        calibrate(as, bs);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::AmbiguousCalibration);
    }
    Calibration flat;
    flat.mean_a = flat.mean_b = 4;
    EXPECT_THROW(pgm_classify(ProbeStats{4, {}, 1}, flat), Error);
    EXPECT_THROW(calibrate(std::span<const ProbeStats>{}, bs), Error);
}
