#include "dmtc/disorder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dmtc {

DisorderSpec DisorderSpec::uniform(double half_width, std::uint64_t seed) {
    DisorderSpec s;
    s.kind = Kind::Uniform;
    s.half_width = half_width;
    s.seed = seed;
    return s;
}

DisorderSpec DisorderSpec::lorentzian(double delta0, std::uint64_t seed) {
    DisorderSpec s;
    s.kind = Kind::Lorentzian;
    s.delta0 = delta0;
    s.seed = seed;
    return s;
}

DisorderSpec DisorderSpec::discrete_bins(std::vector<double> freqs, std::vector<double> probs,
                                         std::uint64_t seed) {
    DisorderSpec s;
    s.kind = Kind::DiscreteBins;
    s.bin_freqs = std::move(freqs);
    s.bin_probs = std::move(probs);
    s.seed = seed;
    return s;
}

void DisorderSpec::validate() const {
    switch (kind) {
        case Kind::Uniform:
            if (!(half_width >= 0) || !std::isfinite(half_width)) {
                throw std::invalid_argument("DisorderSpec: uniform half_width must be >= 0");
            }
            return;
        case Kind::Lorentzian:
            if (!(delta0 >= 0) || !std::isfinite(delta0)) {
                throw std::invalid_argument("DisorderSpec: delta0 must be >= 0");
            }
            return;
        case Kind::DiscreteBins: {
            if (bin_freqs.empty() || bin_freqs.size() != bin_probs.size()) {
                throw std::invalid_argument("DisorderSpec: bins need matching freqs/probs");
            }
            double sum = 0;
            for (double p : bin_probs) {
                if (!(p >= 0)) throw std::invalid_argument("DisorderSpec: negative bin probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw std::invalid_argument("DisorderSpec: bin probabilities must sum to 1");
            }
            return;
        }
    }
    throw std::invalid_argument("DisorderSpec: unknown kind");
}

double DisorderSpec::mean() const {
    switch (kind) {
        case Kind::Uniform:
        case Kind::Lorentzian:
            return 0.0;
        case Kind::DiscreteBins: {
            double m = 0;
            for (size_t i = 0; i < bin_freqs.size(); ++i) m += bin_freqs[i] * bin_probs[i];
            return m;
        }
    }
    return 0.0;
}

DisorderSpec DisorderSpec::with_seed(std::uint64_t s) const {
    DisorderSpec out = *this;
    out.seed = s;
    return out;
}

std::vector<double> sample_frequencies(const DisorderSpec& spec, int n) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("sample_frequencies: n must be >= 1");

    SplitMix64 rng(spec.seed);
    std::vector<double> out(static_cast<size_t>(n));
    switch (spec.kind) {
        case DisorderSpec::Kind::Uniform:
            for (double& v : out) v = rng.uniform(-spec.half_width, spec.half_width);
            break;
        case DisorderSpec::Kind::Lorentzian:
            for (double& v : out) {
                const double u = rng.next_double();
                v = spec.delta0 * std::tan(std::numbers::pi * (u - 0.5));
            }
            break;
        case DisorderSpec::Kind::DiscreteBins:
            for (double& v : out) {
                const double u = rng.next_double();
                double acc = 0;
                size_t pick = spec.bin_freqs.size() - 1;
                for (size_t i = 0; i < spec.bin_probs.size(); ++i) {
                    acc += spec.bin_probs[i];
                    if (u < acc) {
                        pick = i;
                        break;
                    }
                }
                v = spec.bin_freqs[pick];
            }
            break;
    }
    return out;
}

}  // namespace dmtc
