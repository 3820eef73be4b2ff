#pragma once

#include <concepts>
#include <cstdint>
#include <cstddef>

namespace lidx {

/// Index cores are generic over 64-bit unsigned and 64-bit real keys.
template <typename K>
concept IndexKey = std::same_as<K, std::uint64_t> || std::same_as<K, double>;

enum class KeyType : std::uint8_t { U64 = 0, F64 = 1 };

template <IndexKey K>
constexpr KeyType key_type_of() {
    if constexpr (std::same_as<K, std::uint64_t>) return KeyType::U64;
    else return KeyType::F64;
}

using Payload = std::uint64_t;

/// Result of a point lookup. `ops` is the deterministic cost proxy: one unit per
/// model evaluation, key comparison, probed slot or node hop (see each index).
struct SearchResult {
    bool found = false;
    std::size_t position = 0; ///< position if found, insertion point otherwise
    std::uint64_t ops = 0;
};

} // namespace lidx
