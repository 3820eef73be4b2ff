#include "lidx/datasets.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace lidx;

namespace {

std::filesystem::path temp_file(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("lidx_test_" + name);
}

template <typename K>
void expect_strictly_ascending(const std::vector<K> &keys) {
    for (std::size_t i = 1; i < keys.size(); ++i) ASSERT_LT(keys[i - 1], keys[i]) << "at " << i;
}

} // namespace

TEST(DistSpec, RejectsBadParameters) {
    EXPECT_THROW(DistSpec::normal(0, 0).validate(), Error);
    EXPECT_THROW(DistSpec::normal(0, -1).validate(), Error);
    EXPECT_THROW(DistSpec::mixture(5, 1, 0).validate(), Error);
    EXPECT_THROW(DistSpec::uniform(3, 3).validate(), Error);
    EXPECT_NO_THROW(DistSpec::mixture(5e6, 1e6, 50).validate());
}

TEST(GenDataset, UniformFillsWholeSmallRange) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::uniform(0, 10), 10, 7);
    std::vector<std::uint64_t> want(10);
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(ds.keys, want);
}

TEST(GenDataset, UniformTooNarrowThrows) {
    try {
        gen_dataset<std::uint64_t>(DistSpec::uniform(0, 5), 10, 1);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainTooSmall);
    }
}

TEST(GenDataset, NormalMeanWithinThreeStandardErrors) {
    const std::size_t n = 100000;
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), n, 1);
    ASSERT_EQ(ds.size(), n);
    long double sum = 0;
    for (auto k : ds.keys) sum += static_cast<long double>(k);
    const double mean = static_cast<double>(sum / n);
    EXPECT_LT(std::abs(mean - 5e6), 3 * 1e6 / std::sqrt(static_cast<double>(n)));
}

TEST(GenDataset, MixtureSpansTwiceMu) {
    const auto ds = gen_dataset<double>(DistSpec::mixture(5e6, 1e6, 50), 20000, 3);
    expect_strictly_ascending(ds.keys);
    // components sit at k * 2e5 with sd 2e4; nothing much beyond 0 .. 1e7
    EXPECT_GT(ds.keys.front(), 2e5 - 6 * 2e4);
    EXPECT_LT(ds.keys.back(), 1e7 + 6 * 2e4);
}

TEST(GenDataset, SameSeedSameKeys) {
    for (auto spec : {DistSpec::normal(5e6, 1e6), DistSpec::mixture(5e6, 1e6, 50), DistSpec::uniform(-1, 1)}) {
        EXPECT_EQ(gen_dataset<double>(spec, 5000, 99), gen_dataset<double>(spec, 5000, 99));
        EXPECT_EQ(gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 5000, 99),
                  gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 5000, 99));
    }
    EXPECT_NE(gen_dataset<double>(DistSpec::normal(0, 1), 100, 1).keys,
              gen_dataset<double>(DistSpec::normal(0, 1), 100, 2).keys);
}

TEST(GenDataset, SortedAndDistinctAcrossSeeds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        expect_strictly_ascending(gen_dataset<std::uint64_t>(DistSpec::normal(100000, 30000), 1500, seed).keys);
        expect_strictly_ascending(gen_dataset<double>(DistSpec::mixture(0.5, 0.1, 4), 1500, seed).keys);
    }
}

TEST(GenDataset, FromFileTakesPrefixOfStoredKeys) {
    const auto path = temp_file("fromfile.bin");
    const auto src = gen_dataset<std::uint64_t>(DistSpec::uniform(0, 1e6), 100, 5);
    write_dataset(src, path);
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::from_file(path), 100, 0);
    EXPECT_EQ(ds.keys, src.keys);
    EXPECT_THROW(gen_dataset<std::uint64_t>(DistSpec::from_file(path), 101, 0), Error);
    std::filesystem::remove(path);
}

TEST(AttackerKeys, InsideRangeAndDistinct) {
    const std::uint64_t lo = 3000000, hi = 7000000;
    const auto keys = gen_attacker_keys<std::uint64_t>(lo, hi, 100, 11);
    ASSERT_EQ(keys.size(), 100u);
    expect_strictly_ascending(keys);
    for (auto k : keys) {
        EXPECT_GE(k, lo);
        EXPECT_LT(k, hi);
    }
    const auto one = gen_attacker_keys<double>(0.0, 1.0, 1, 4);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_GE(one[0], 0.0);
    EXPECT_LT(one[0], 1.0);
    EXPECT_NE(gen_attacker_keys<std::uint64_t>(lo, hi, 100, 1), gen_attacker_keys<std::uint64_t>(lo, hi, 100, 2));
}

TEST(RangeEstimate, FullSampleGivesExactExtremes) {
    const auto ds = gen_dataset<double>(DistSpec::normal(0, 1), 500, 8);
    const auto [lo, hi] = sample_range_estimate(ds, ds.size(), 1);
    EXPECT_EQ(lo, ds.keys.front());
    EXPECT_EQ(hi, ds.keys.back());
}

TEST(RangeEstimate, SingleSampleIsDegenerate) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(1e6, 1e4), 500, 8);
    const auto [lo, hi] = sample_range_estimate(ds, 1, 3);
    EXPECT_EQ(lo, hi);
    EXPECT_TRUE(std::binary_search(ds.keys.begin(), ds.keys.end(), lo));
}

TEST(RangeEstimate, ThousandSamplesCoverAlmostEverything) {
    const auto ds = gen_dataset<double>(DistSpec::normal(0, 1), 1000000, 21);
    const auto [lo, hi] = sample_range_estimate(ds, 1000, 22);
    const auto inside = std::upper_bound(ds.keys.begin(), ds.keys.end(), hi) -
                        std::lower_bound(ds.keys.begin(), ds.keys.end(), lo);
    EXPECT_GE(static_cast<double>(inside), 0.99 * static_cast<double>(ds.size()));
}

TEST(RangeEstimate, RejectsBadSampleSize) {
    const auto ds = gen_dataset<double>(DistSpec::normal(0, 1), 10, 1);
    EXPECT_THROW(sample_range_estimate(ds, 0, 1), Error);
    EXPECT_THROW(sample_range_estimate(ds, 11, 1), Error);
}

TEST(DatasetFile, RoundTripBothKeyTypes) {
    const auto path = temp_file("roundtrip.bin");
    const auto u = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), 1000, 4);
    write_dataset(u, path);
    EXPECT_EQ(peek_key_type(path), KeyType::U64);
    EXPECT_EQ(read_dataset<std::uint64_t>(path).keys, u.keys);

    const auto d = gen_dataset<double>(DistSpec::mixture(0, 1, 3), 1000, 4);
    write_dataset(d, path);
    EXPECT_EQ(peek_key_type(path), KeyType::F64);
    EXPECT_EQ(read_dataset<double>(path).keys, d.keys);
    std::filesystem::remove(path);
}

TEST(DatasetFile, EmptyRoundTrip) {
    const Dataset<double> empty;
    const auto bytes = encode_dataset(empty);
    EXPECT_EQ(bytes.size(), kDatasetHeaderBytes);
    EXPECT_TRUE(decode_dataset<double>(bytes).keys.empty());
}

TEST(DatasetFile, TruncatedPayloadReportsOffset) {
    Dataset<std::uint64_t> ds;
    ds.keys = {1, 2, 3};
    auto bytes = encode_dataset(ds);
    bytes.resize(bytes.size() - 8); // count still says 3
    try {
        decode_dataset<std::uint64_t>(bytes);
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_EQ(e.offset(), kDatasetHeaderBytes + 16);
    }
}

TEST(DatasetFile, MalformedInputs) {
    Dataset<std::uint64_t> ds;
    ds.keys = {5, 9};
    const auto good = encode_dataset(ds);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_dataset<std::uint64_t>(bad_magic), FormatError);

    EXPECT_THROW(decode_dataset<double>(good), FormatError); // tag says u64

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_dataset<std::uint64_t>(trailing), FormatError);

    auto unsorted = good;
    std::swap_ranges(unsorted.begin() + 17, unsorted.begin() + 25, unsorted.begin() + 25);
    EXPECT_THROW(decode_dataset<std::uint64_t>(unsorted), FormatError);

    const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 12);
    EXPECT_THROW(decode_dataset<std::uint64_t>(short_header), FormatError);
}

TEST(DatasetFile, MissingFileIsAnError) {
    EXPECT_THROW(read_dataset<double>(temp_file("does_not_exist.bin")), Error);
}

TEST(SampleIndices, DistinctAndInRange) {
    Rng rng(5);
    const auto idx = sample_indices(50, 50, rng);
    std::vector<std::uint64_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
    EXPECT_THROW(sample_indices(3, 4, rng), Error);
}

TEST(Rng, DeriveSeedIsPureAndSpreads) {
    EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
    EXPECT_NE(derive_seed(42, 7), derive_seed(42, 8));
    EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform_open();
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(r.below(17), 17u);
    }
}
