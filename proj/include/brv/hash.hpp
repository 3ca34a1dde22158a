// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace brv {

/// 128-bit digest value. Ordered so it can key sorted containers.
struct Hash128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    auto operator<=>(const Hash128&) const = default;

    bool is_zero() const noexcept { return hi == 0 && lo == 0; }

    /// 32 lowercase hex digits, hi word first.
    std::string hex() const;
};

/// MurmurHash3 x64 128-bit. Non-cryptographic; used for content
/// fingerprints and cache keys only.
Hash128 murmur3_128(std::string_view data, std::uint64_t seed = 0);

struct Hash128Hasher {
    std::size_t operator()(const Hash128& h) const noexcept {
        return static_cast<std::size_t>(h.hi ^ (h.lo * 0x9e3779b97f4a7c15ULL));
    }
};

} // namespace brv
