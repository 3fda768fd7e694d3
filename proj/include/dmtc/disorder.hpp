// disorder.hpp — Emitter-frequency disorder distributions and deterministic
// sampling keyed by a 64-bit seed.

#pragma once

#include <cstdint>
#include <vector>

#include "dmtc/rng.hpp"

namespace dmtc {

struct DisorderSpec {
    enum class Kind { Uniform, Lorentzian, DiscreteBins };

    Kind kind = Kind::Uniform;
    double half_width = 0.0;            // Uniform: draws from [-half_width, +half_width)
    double delta0 = 0.0;                // Lorentzian half-width
    std::vector<double> bin_freqs;      // DiscreteBins
    std::vector<double> bin_probs;
    std::uint64_t seed = 0;

    static DisorderSpec uniform(double half_width, std::uint64_t seed = 0);
    static DisorderSpec lorentzian(double delta0, std::uint64_t seed = 0);
    static DisorderSpec discrete_bins(std::vector<double> freqs, std::vector<double> probs,
                                      std::uint64_t seed = 0);

    void validate() const;
    double mean() const;  // distribution mean (center for Lorentzian)
    DisorderSpec with_seed(std::uint64_t s) const;
};

// n i.i.d. draws: uniform from [-w, +w), Lorentzian via inverse CDF
// delta0 * tan(pi (u - 1/2)), discrete bins by categorical draw.
std::vector<double> sample_frequencies(const DisorderSpec& spec, int n);

}  // namespace dmtc
