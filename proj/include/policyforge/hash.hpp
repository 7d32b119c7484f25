#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace policyforge {

// Seeded 64-bit FNV-1a with a SplitMix64 finalizer. Stable across platforms.
std::uint64_t stable_hash64(std::string_view data, std::uint64_t seed = 0);

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string hex64(std::uint64_t v);

}  // namespace policyforge
