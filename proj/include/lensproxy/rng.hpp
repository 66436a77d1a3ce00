#pragma once

#include <cstdint>
#include <limits>

namespace lensproxy {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream. The value at position i depends only on
/// (key, i), so streams for different keys can be consumed in any order or on
/// any thread without changing results.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t domain = 0)
        : key_(mix64(mix64(mix64(seed) ^ (stream + 0x9e3779b97f4a7c15ULL)) ^ (domain * 0xd1b54a32d192ed03ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t x;
        do x = (*this)();
        while (x >= limit);
        return x % bound;
    }

    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Stream domains keep independent uses of one user seed from overlapping.
namespace rng_domain {
inline constexpr std::uint64_t directions = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t weight_init = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t novel_origins = 5;
inline constexpr std::uint64_t novel_directions = 6;
}  // namespace rng_domain

}  // namespace lensproxy
