#pragma once

#include "lidx/error.hpp"
#include "lidx/key.hpp"
#include "lidx/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lidx {

enum class DistKind { Normal, Mixture, Uniform, FromFile };

/// Key distribution. For Mixture, `components` normals of standard deviation
/// sigma/components are centred at k * (2 mu / components), k = 1..components,
/// so the mixture spans [0, 2 mu] like the single normal it is compared with.
struct DistSpec {
    DistKind kind = DistKind::Normal;
    double mu = 5e6;
    double sigma = 1e6;
    std::uint32_t components = 50;
    double lo = 0; ///< Uniform only, inclusive
    double hi = 1; ///< Uniform only, exclusive
    std::filesystem::path path; ///< FromFile only

    static DistSpec normal(double mu, double sigma) { return {DistKind::Normal, mu, sigma, 1, 0, 1, {}}; }
    static DistSpec mixture(double mu, double sigma, std::uint32_t components) {
        return {DistKind::Mixture, mu, sigma, components, 0, 1, {}};
    }
    static DistSpec uniform(double lo, double hi) { return {DistKind::Uniform, 0, 1, 1, lo, hi, {}}; }
    static DistSpec from_file(std::filesystem::path p) { return {DistKind::FromFile, 0, 1, 1, 0, 1, std::move(p)}; }

    /// Throws PreconditionViolation when the invariants do not hold.
    void validate() const;
};

template <IndexKey K>
struct Dataset {
    std::vector<K> keys; ///< strictly ascending
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return keys.size(); }
    bool operator==(const Dataset &) const = default;
};

/// One real-valued draw from a Normal or Mixture spec (inverse-CDF sampling).
double sample_real(const DistSpec &spec, Rng &rng);

/// `n` distinct keys drawn from `spec`, sorted. Integer keys are rounded draws;
/// colliding or unrepresentable draws are replaced by fresh ones.
template <IndexKey K>
Dataset<K> gen_dataset(const DistSpec &spec, std::size_t n, std::uint64_t seed);

/// `count` distinct keys uniform in [lo, hi), sorted.
template <IndexKey K>
std::vector<K> gen_attacker_keys(K lo, K hi, std::size_t count, std::uint64_t seed);

/// (min, max) of `m` keys sampled without replacement: an attacker's guess at the
/// populated key range.
template <IndexKey K>
std::pair<K, K> sample_range_estimate(const Dataset<K> &ds, std::size_t m, std::uint64_t seed);

/// `m` distinct indices from [0, n), in the order Floyd's algorithm yields them.
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t m, Rng &rng);

// Binary format: "LIDXDATA", 1-byte key tag (0 = u64, 1 = f64), u64 LE count,
// then count LE 8-byte keys in ascending order.
inline constexpr char kDatasetMagic[8] = {'L', 'I', 'D', 'X', 'D', 'A', 'T', 'A'};
inline constexpr std::size_t kDatasetHeaderBytes = 17;

template <IndexKey K>
void write_dataset(const Dataset<K> &ds, const std::filesystem::path &path);

template <IndexKey K>
Dataset<K> read_dataset(const std::filesystem::path &path);

/// Reads only the header tag; used to dispatch on key type.
KeyType peek_key_type(const std::filesystem::path &path);

template <IndexKey K>
std::vector<std::uint8_t> encode_dataset(const Dataset<K> &ds);

/// Throws FormatError (with the byte offset) on a bad magic or tag, a short
/// header or payload, trailing bytes, or keys that are not strictly ascending.
template <IndexKey K>
Dataset<K> decode_dataset(std::span<const std::uint8_t> bytes);

} // namespace lidx
