#pragma once

#include <cstdint>
#include <limits>

namespace lidx {

/// SplitMix64 step; used both to seed Rng and to derive independent streams.
constexpr std::uint64_t splitmix64(std::uint64_t &state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream seed for trial `stream` under `master`. Pure function, so any trial can
/// be replayed on its own.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = stream ^ a;
    return splitmix64(t);
}

/// xoshiro256** seeded through SplitMix64. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept {
        std::uint64_t s = seed;
        for (auto &w : s_) w = splitmix64(s);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform in the open interval (0, 1); safe to feed into a quantile function.
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) via Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound == 0) return 0;
        for (;;) {
            const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= bound || low >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
};

} // namespace lidx
