// Deterministic RNG streams with hash-based splitting.
//
// The whole artifact draws randomness through these streams so that a master
// seed fully determines every output byte, independent of the standard
// library's distribution implementations.  Generators are the public-domain
// reference algorithms: splitmix64 (Steele/Lea/Flood) for seeding and stream
// derivation, xoshiro256++ (Blackman/Vigna) for the stream itself.
#pragma once

#include <cmath>
#include <cstdint>

namespace contact {

// splitmix64 finalizer: a bijective mixer on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Documented stream-splitting function: replica/component i of master seed s
// draws from the stream seeded with derive_seed(s, i).  Nested splits compose:
// derive_seed(derive_seed(s, i), j) is the (i, j) sub-stream.  Changing the
// number of replicas never reshuffles earlier streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index + 0x5851F42D4C957F2DULL));
}

// xoshiro256++ with splitmix64 state initialization.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) {
            sm += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]: safe as a log argument.
    double uniform_pos() { return 1.0 - uniform(); }

    // Exponential with the given rate (mean 1/rate); rate > 0.
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform integer in [0, n); n > 0.  Unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace contact
