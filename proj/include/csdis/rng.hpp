#pragma once

#include <cstdint>

namespace csdis {

// SplitMix64 finalizer; a bijective avalanche mix on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_words(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ mix64(b));
}

constexpr std::uint64_t hash_words(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    return hash_words(hash_words(a, b), c);
}

constexpr std::uint64_t hash_words(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                   std::uint64_t d) noexcept {
    return hash_words(hash_words(a, b, c), d);
}

// Top 53 bits mapped onto [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based stream: value k is a pure function of (seed, stream, k), so
// results do not depend on platform, thread count or generation order.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(hash_words(seed, stream)) {}

    constexpr std::uint64_t at(std::uint64_t counter) const noexcept { return hash_words(key_, counter); }

    constexpr std::uint64_t next_u64() noexcept { return at(counter_++); }
    constexpr double uniform() noexcept { return to_unit(next_u64()); }
    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    constexpr std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const auto x = next_u64();
            if (x < limit) return x % n;
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Named stream identifiers keep independent consumers of one seed apart.
namespace streams {
inline constexpr std::uint64_t kFactors = 0x666163746f7273ULL;
inline constexpr std::uint64_t kRandomContent = 0x72636f6e74656e74ULL;
inline constexpr std::uint64_t kRandomStyle = 0x727374796c65ULL;
inline constexpr std::uint64_t kSubsample = 0x7375627361ULL;
inline constexpr std::uint64_t kShuffle = 0x73687566666c65ULL;
inline constexpr std::uint64_t kInit = 0x696e6974ULL;
inline constexpr std::uint64_t kBiasDecoder = 0x62696173ULL;
} // namespace streams

} // namespace csdis
