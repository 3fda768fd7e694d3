// rng.hpp — Small deterministic RNG used across the toolkit.
//
// SplitMix64 stream keyed by (seed, stream); identical draws on every platform
// and independent of evaluation order, which is what the reproducibility
// contract of the scan drivers rests on.

#pragma once

#include <cstdint>

namespace dmtc {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from a master seed and a stream index.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
    SplitMix64 mix(master ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL));
    mix.next();
    return mix.next();
}

}  // namespace dmtc
