#pragma once

#include <cstdint>

namespace mf {

/// splitmix64, used to expand seeds into independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// xoshiro256** — small, fast, splittable by seed stream; one instance per
/// simulation replica gives bitwise-reproducible ensembles regardless of
/// scheduling.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;
    explicit Xoshiro256(std::uint64_t seed = 0x2545f4914f6cdd1dull) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }
    static Xoshiro256 stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = seed;
        std::uint64_t a = splitmix64(sm);
        sm ^= 0x9e3779b97f4a7c15ull * (stream_id + 1);
        return Xoshiro256(a ^ splitmix64(sm));
    }

    result_type operator()() {
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

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ull; }

    /// Uniform double in [0,1).
    double uniform() { return double(operator()() >> 11) * 0x1.0p-53; }
    /// Uniform double in (0,1] — safe as a log() argument.
    double uniform_pos() { return double((operator()() >> 11) + 1) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for n << 2^64
        __uint128_t m = (__uint128_t)operator()() * n;
        return std::uint64_t(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace mf
