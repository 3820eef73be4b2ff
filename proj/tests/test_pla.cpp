#include "lidx/datasets.hpp"
#include "lidx/oracles.hpp"
#include "lidx/pla.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

using namespace lidx;

namespace {

// every covered key predicted within epsilon, and the segments tile 0..n-1
template <typename K>
void expect_sound(const PlaFit<K> &fit, const std::vector<K> &keys) {
    std::size_t pos = 0;
    for (std::size_t s = 0; s < fit.segments.size(); ++s) {
        const auto &seg = fit.segments[s];
        ASSERT_EQ(fit.start_of(s), pos);
        ASSERT_GT(seg.n_covered, 0u);
        ASSERT_EQ(seg.first_key, keys[pos]);
        for (std::size_t j = 0; j < seg.n_covered; ++j, ++pos) {
            const auto p = segment_predict(seg, keys[pos], keys.size());
            const auto err = p > pos ? p - pos : pos - p;
            ASSERT_LE(err, fit.epsilon) << "key " << pos << " segment " << s;
        }
    }
    EXPECT_EQ(pos, keys.size());
}

std::vector<std::uint64_t> random_u64(Rng &rng, std::size_t n, std::uint64_t spread) {
    std::vector<std::uint64_t> keys;
    std::uint64_t k = rng.below(1000);
    for (std::size_t i = 0; i < n; ++i) {
        k += 1 + rng.below(spread);
        keys.push_back(k);
    }
    return keys;
}

} // namespace

TEST(FitSegments, CollinearKeysGiveOneSegment) {
    const std::vector<std::uint64_t> keys{0, 10, 20, 30};
    const auto fit = fit_segments(keys, 1);
    ASSERT_EQ(fit.segments.size(), 1u);
    EXPECT_NEAR(fit.segments[0].slope, 0.1, 1e-12);
    EXPECT_EQ(segment_predict(fit.segments[0], std::uint64_t{20}, keys.size()), 2u);
    expect_sound(fit, keys);
}

// y = 0.003 x + 1 stays within 1 of every position, so one segment is enough
TEST(FitSegments, ThreePlusThreeClustersFitOneLine) {
    const std::vector<std::uint64_t> keys{0, 1, 2, 1000, 1001, 1002};
    EXPECT_EQ(oracle::min_segments(keys, 1), 1u);
    const auto fit = fit_segments(keys, 1);
    EXPECT_EQ(fit.segments.size(), 1u);
    expect_sound(fit, keys);
}

TEST(FitSegments, WiderClustersNeedTwoSegments) {
    std::vector<std::uint64_t> keys;
    for (std::uint64_t i = 0; i < 10; ++i) keys.push_back(i);
    for (std::uint64_t i = 0; i < 10; ++i) keys.push_back(1000 + i);
    EXPECT_EQ(oracle::min_segments(keys, 1), 2u);
    EXPECT_EQ(fit_segments(keys, 1).segments.size(), 2u);
}

TEST(FitSegments, EmptyAndSingle) {
    EXPECT_TRUE(fit_segments(std::vector<double>{}, 4).segments.empty());
    const auto one = fit_segments(std::vector<double>{3.5}, 4);
    ASSERT_EQ(one.segments.size(), 1u);
    EXPECT_EQ(segment_predict(one.segments[0], 3.5, 1), 0u);
}

TEST(FitSegments, RejectsBadInput) {
    EXPECT_THROW(fit_segments(std::vector<std::uint64_t>{1, 2, 3}, 0), Error);
    EXPECT_THROW(fit_segments(std::vector<std::uint64_t>{1, 3, 3}, 1), Error);
    EXPECT_THROW(fit_segments(std::vector<double>{2.0, 1.0}, 1), Error);
}

TEST(SegmentPredict, ClampsBelowAndAbove) {
    const std::vector<std::uint64_t> keys{100, 110, 120, 130};
    const auto fit = fit_segments(keys, 1);
    EXPECT_EQ(segment_predict(fit.segments[0], std::uint64_t{0}, keys.size()), 0u);
    EXPECT_EQ(segment_predict(fit.segments[0], std::uint64_t{1000000}, keys.size()), 3u);
}

TEST(SegmentPredict, RoundsHalfAwayFromZero) {
    EXPECT_EQ(clamp_round(2.5, 10), 3u);
    EXPECT_EQ(clamp_round(2.49, 10), 2u);
    EXPECT_EQ(clamp_round(-0.5, 10), 0u);
    EXPECT_EQ(clamp_round(9.5, 10), 9u);
    EXPECT_EQ(clamp_round(1.0, 0), 0u);
}

TEST(MinSegmentsOracle, SmallCases) {
    EXPECT_EQ(oracle::min_segments(std::vector<std::uint64_t>{5, 10, 15, 20, 25}, 1), 1u);
    EXPECT_EQ(oracle::min_segments(std::vector<double>{-1.0, 7.0}, 1), 1u);
    EXPECT_EQ(oracle::min_segments(std::vector<double>{}, 1), 0u);
    std::vector<std::uint64_t> big(oracle::kMaxOracleKeys + 1);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = i * i;
    try {
        oracle::min_segments(big, 2);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleTooLarge);
    }
}

// Optimality and soundness against the DP oracle on random instances.
TEST(FitSegments, MatchesOracleOnThousandInstances) {
    Rng rng(20240917);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(64);
        const std::size_t eps = std::size_t{1} << (t % 3);
        if (t % 2 == 0) {
            const auto keys = random_u64(rng, n, 1 + rng.below(50));
            const auto fit = fit_segments(keys, eps);
            ASSERT_EQ(fit.segments.size(), oracle::min_segments(keys, eps)) << "instance " << t;
            expect_sound(fit, keys);
        } else {
            std::vector<double> keys;
            double k = rng.uniform();
            for (std::size_t i = 0; i < n; ++i) {
                k += 1e-3 + rng.uniform() * (i % 7 == 0 ? 10 : 0.1);
                keys.push_back(k);
            }
            const auto fit = fit_segments(keys, eps);
            ASSERT_EQ(fit.segments.size(), oracle::min_segments(keys, eps)) << "instance " << t;
            expect_sound(fit, keys);
        }
    }
}

TEST(FitSegments, SoundOnLargeSkewedData) {
    for (std::size_t eps : {1u, 8u, 64u}) {
        const auto u = gen_dataset<std::uint64_t>(DistSpec::mixture(5e6, 1e6, 50), 50000, eps);
        expect_sound(fit_segments(u.keys, eps), u.keys);
        const auto d = gen_dataset<double>(DistSpec::normal(0, 1), 50000, eps);
        expect_sound(fit_segments(d.keys, eps), d.keys);
    }
}

TEST(FitSegments, TinyRealSpacingStaysSound) {
    // the ALEX attack's 1e-13 steps around a normal key
    std::vector<double> keys;
    for (int i = 0; i < 2000; ++i) keys.push_back(0.37 + i * 1e-13);
    for (int i = 1; i <= 500; ++i) keys.push_back(0.4 + i * 1e-3);
    for (std::size_t eps : {1u, 4u, 32u}) expect_sound(fit_segments(keys, eps), keys);
}

TEST(FitSegments, FewerSegmentsForLargerEpsilon) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 20000, 2);
    std::size_t prev = SIZE_MAX;
    for (std::size_t eps : {1u, 2u, 4u, 8u, 16u, 64u, 256u}) {
        const std::size_t s = fit_segments(ds.keys, eps).segments.size();
        EXPECT_LE(s, prev) << "eps " << eps;
        prev = s;
    }
}

TEST(FitSegments, WorkGrowsLinearly) {
    // ops per key at the two ends of a decade of n agree within 10%
    const auto per_key = [](std::size_t n) {
        const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), n, 9);
        PlaStats st;
        fit_segments(ds.keys, 16, &st);
        return static_cast<double>(st.points + st.hull_steps) / static_cast<double>(n);
    };
    const double small = per_key(100000), large = per_key(1000000);
    EXPECT_LT(std::abs(large / small - 1), 0.10) << small << " vs " << large;
}
