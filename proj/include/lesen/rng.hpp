#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace lesen {

// FNV-1a based seed derivation. Independent RNG streams are keyed by
// (base seed, domain string, integer tags); the stream layout is part of
// the reproducibility contract, so keep this stable.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    constexpr std::uint64_t prime = 0x100000001b3ULL;
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= prime;
    }
    return h;
}

inline std::uint64_t hash_str(std::uint64_t h, std::string_view s) {
    constexpr std::uint64_t prime = 0x100000001b3ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= prime;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view domain,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = hash_combine(h, base);
    h = hash_str(h, domain);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace lesen
