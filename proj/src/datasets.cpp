#include "lidx/datasets.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

namespace lidx {

void DistSpec::validate() const {
    switch (kind) {
    case DistKind::Normal:
    case DistKind::Mixture:
        if (!(sigma > 0)) throw Error(ErrorCode::PreconditionViolation, "sigma must be positive");
        if (components < 1) throw Error(ErrorCode::PreconditionViolation, "components must be >= 1");
        break;
    case DistKind::Uniform:
        if (!(lo < hi)) throw Error(ErrorCode::PreconditionViolation, "uniform requires lo < hi");
        break;
    case DistKind::FromFile:
        break;
    }
}

double sample_real(const DistSpec &spec, Rng &rng) {
    static const boost::math::normal_distribution<double> standard;
    switch (spec.kind) {
    case DistKind::Normal:
        return spec.mu + spec.sigma * boost::math::quantile(standard, rng.uniform_open());
    case DistKind::Mixture: {
        const double k = 1.0 + static_cast<double>(rng.below(spec.components));
        const double mean = k * (2.0 * spec.mu / spec.components);
        const double sd = spec.sigma / spec.components;
        return mean + sd * boost::math::quantile(standard, rng.uniform_open());
    }
    case DistKind::Uniform:
        return spec.lo + rng.uniform() * (spec.hi - spec.lo);
    case DistKind::FromFile:
        break;
    }
    throw Error(ErrorCode::PreconditionViolation, "sample_real needs a parametric distribution");
}

std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t m, Rng &rng) {
    if (m > n) throw Error(ErrorCode::InsufficientData, "cannot sample more indices than exist");
    // Floyd's algorithm: exactly m draws, no rejection loop.
    std::vector<std::uint64_t> out;
    out.reserve(m);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(m * 2);
    for (std::uint64_t j = n - m; j < n; ++j) {
        const std::uint64_t t = rng.below(j + 1);
        const std::uint64_t pick = seen.contains(t) ? j : t;
        seen.insert(pick);
        out.push_back(pick);
    }
    return out;
}

namespace {

template <IndexKey K>
bool to_key(double x, K &out) {
    if constexpr (std::same_as<K, double>) {
        if (!std::isfinite(x)) return false;
        out = x;
        return true;
    } else {
        const double r = std::round(x);
        if (!(r >= 0.0) || r >= 18446744073709551616.0) return false;
        out = static_cast<std::uint64_t>(r);
        return true;
    }
}

template <IndexKey K>
void assert_strictly_ascending(const std::vector<K> &keys) {
    if (std::adjacent_find(keys.begin(), keys.end(), std::greater_equal<K>()) != keys.end())
        throw Error(ErrorCode::PreconditionViolation, "generated keys are not strictly ascending");
}

// Integer uniform draws use Floyd sampling over the integer range so that even
// a range of exactly n values terminates.
std::vector<std::uint64_t> uniform_integers(double lo, double hi, std::size_t n, Rng &rng) {
    const double first = std::ceil(lo);
    const double last = std::ceil(hi); // exclusive
    if (first < 0 || last > 18446744073709551615.0)
        throw Error(ErrorCode::PreconditionViolation, "uniform integer range outside u64");
    const auto base = static_cast<std::uint64_t>(first);
    const std::uint64_t width = last > first ? static_cast<std::uint64_t>(last) - base : 0;
    if (width < n) throw Error(ErrorCode::DomainTooSmall, "uniform range holds fewer than n integers");
    auto picks = sample_indices(width, n, rng);
    for (auto &p : picks) p += base;
    std::sort(picks.begin(), picks.end());
    return picks;
}

template <IndexKey K>
std::vector<K> draw_distinct(const DistSpec &spec, std::size_t n, Rng &rng) {
    if constexpr (std::same_as<K, std::uint64_t>) {
        if (spec.kind == DistKind::Uniform) return uniform_integers(spec.lo, spec.hi, n, rng);
    }
    std::vector<K> keys;
    keys.reserve(n);
    int stalled_rounds = 0;
    while (keys.size() < n) {
        const std::size_t before = keys.size();
        const std::size_t deficit = n - before;
        for (std::size_t i = 0; i < deficit; ++i) {
            K k{};
            if (to_key<K>(sample_real(spec, rng), k)) keys.push_back(k);
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        stalled_rounds = keys.size() == before ? stalled_rounds + 1 : 0;
        if (stalled_rounds >= 64)
            throw Error(ErrorCode::DomainTooSmall, "distribution cannot produce n distinct keys");
    }
    return keys;
}

} // namespace

template <IndexKey K>
Dataset<K> gen_dataset(const DistSpec &spec, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorCode::PreconditionViolation, "n must be >= 1");
    spec.validate();
    if (spec.kind == DistKind::FromFile) {
        auto ds = read_dataset<K>(spec.path);
        if (ds.size() < n) throw Error(ErrorCode::InsufficientData, "file holds fewer than n keys");
        ds.keys.resize(n);
        ds.seed = seed;
        return ds;
    }
    Rng rng(seed);
    Dataset<K> ds{draw_distinct<K>(spec, n, rng), seed};
    assert_strictly_ascending(ds.keys);
    return ds;
}

template <IndexKey K>
std::vector<K> gen_attacker_keys(K lo, K hi, std::size_t count, std::uint64_t seed) {
    if (!(lo < hi)) throw Error(ErrorCode::PreconditionViolation, "attacker range requires lo < hi");
    auto spec = DistSpec::uniform(static_cast<double>(lo), static_cast<double>(hi));
    Rng rng(seed);
    auto keys = draw_distinct<K>(spec, count, rng);
    // Real draws round to hi only through floating-point error; clamp them back in.
    if constexpr (std::same_as<K, double>) {
        for (auto &k : keys)
            if (k >= hi) k = std::nextafter(hi, lo);
    }
    assert_strictly_ascending(keys);
    return keys;
}

template <IndexKey K>
std::pair<K, K> sample_range_estimate(const Dataset<K> &ds, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw Error(ErrorCode::PreconditionViolation, "m must be >= 1");
    if (m > ds.size()) throw Error(ErrorCode::InsufficientData, "m exceeds dataset size");
    Rng rng(seed);
    const auto idx = sample_indices(ds.size(), m, rng);
    const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
    // keys are sorted, so the extreme indices give the extreme keys
    return {ds.keys[*lo], ds.keys[*hi]};
}

namespace {

void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
}

template <IndexKey K>
std::uint64_t key_bits(K k) {
    if constexpr (std::same_as<K, double>) return std::bit_cast<std::uint64_t>(k);
    else return k;
}

template <IndexKey K>
K key_from_bits(std::uint64_t v) {
    if constexpr (std::same_as<K, double>) return std::bit_cast<double>(v);
    else return v;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

template <IndexKey K>
std::vector<std::uint8_t> encode_dataset(const Dataset<K> &ds) {
    std::vector<std::uint8_t> out;
    out.reserve(kDatasetHeaderBytes + 8 * ds.size());
    out.insert(out.end(), std::begin(kDatasetMagic), std::end(kDatasetMagic));
    out.push_back(static_cast<std::uint8_t>(key_type_of<K>()));
    put_u64(out, ds.size());
    for (K k : ds.keys) put_u64(out, key_bits(k));
    return out;
}

template <IndexKey K>
Dataset<K> decode_dataset(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) throw FormatError("truncated magic", bytes.size());
    if (!std::equal(std::begin(kDatasetMagic), std::end(kDatasetMagic), bytes.begin()))
        throw FormatError("bad magic", 0);
    if (bytes.size() < 9) throw FormatError("missing key-type tag", 8);
    if (bytes[8] != static_cast<std::uint8_t>(key_type_of<K>())) throw FormatError("unexpected key-type tag", 8);
    if (bytes.size() < kDatasetHeaderBytes) throw FormatError("truncated count", bytes.size());
    const std::uint64_t n = get_u64(bytes, 9);
    const std::uint64_t available = (bytes.size() - kDatasetHeaderBytes) / 8;
    if (available < n) throw FormatError("truncated payload", kDatasetHeaderBytes + available * 8);
    if (bytes.size() != kDatasetHeaderBytes + n * 8)
        throw FormatError("trailing bytes after payload", kDatasetHeaderBytes + n * 8);
    Dataset<K> ds;
    ds.keys.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t at = kDatasetHeaderBytes + i * 8;
        const K k = key_from_bits<K>(get_u64(bytes, at));
        if constexpr (std::same_as<K, double>) {
            if (std::isnan(k)) throw FormatError("NaN key", at);
        }
        if (!ds.keys.empty() && !(ds.keys.back() < k)) throw FormatError("keys not strictly ascending", at);
        ds.keys.push_back(k);
    }
    return ds;
}

template <IndexKey K>
void write_dataset(const Dataset<K> &ds, const std::filesystem::path &path) {
    const auto bytes = encode_dataset(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::FormatError, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::FormatError, "short write to " + path.string());
}

template <IndexKey K>
Dataset<K> read_dataset(const std::filesystem::path &path) {
    const auto bytes = slurp(path);
    return decode_dataset<K>(bytes);
}

KeyType peek_key_type(const std::filesystem::path &path) {
    const auto bytes = slurp(path);
    if (bytes.size() < 9) throw FormatError("truncated header", bytes.size());
    if (!std::equal(std::begin(kDatasetMagic), std::end(kDatasetMagic), bytes.begin()))
        throw FormatError("bad magic", 0);
    if (bytes[8] > 1) throw FormatError("unknown key-type tag", 8);
    return static_cast<KeyType>(bytes[8]);
}

#define LIDX_INSTANTIATE(K)                                                                        \
    template Dataset<K> gen_dataset<K>(const DistSpec &, std::size_t, std::uint64_t);              \
    template std::vector<K> gen_attacker_keys<K>(K, K, std::size_t, std::uint64_t);                \
    template std::pair<K, K> sample_range_estimate<K>(const Dataset<K> &, std::size_t, std::uint64_t); \
    template std::vector<std::uint8_t> encode_dataset<K>(const Dataset<K> &);                      \
    template Dataset<K> decode_dataset<K>(std::span<const std::uint8_t>);                          \
    template void write_dataset<K>(const Dataset<K> &, const std::filesystem::path &);             \
    template Dataset<K> read_dataset<K>(const std::filesystem::path &);

LIDX_INSTANTIATE(std::uint64_t)
LIDX_INSTANTIATE(double)

#undef LIDX_INSTANTIATE

} // namespace lidx
