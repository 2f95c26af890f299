#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace factorlab {

/// SplitMix64 step. Used for seeding and for deriving independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** seeded through SplitMix64. The algorithm, the seeding and the
/// variate transforms below are part of the synthetic-data contract: a given
/// (seed, stream) pair yields the same sequence on every platform.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static Xoshiro256 from_state(const std::array<std::uint64_t, 4>& state) {
        Xoshiro256 g(0);
        for (std::size_t k = 0; k < 4; ++k) g.s_[k] = state[k];
        return g;
    }

    /// Independent stream: seed mixed with a stream id through SplitMix64.
    static Xoshiro256 stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = seed ^ (0xD1B54A32D192ED03ULL * (stream_id + 1));
        return Xoshiro256(splitmix64(sm));
    }

    std::uint64_t next() {
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
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by the basic Box-Muller transform (one variate per call;
    /// the sine partner is discarded so the stream stays stateless).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

}  // namespace factorlab
