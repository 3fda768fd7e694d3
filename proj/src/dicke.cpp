#include "dmtc/dicke.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc::dicke {

namespace {

std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

}  // namespace

std::uint64_t multiplicity(int n_spins, int twice_j) {
    if (n_spins < 0 || twice_j < 0 || twice_j > n_spins) return 0;
    if ((n_spins - twice_j) % 2 != 0) return 0;
    const int k = (n_spins - twice_j) / 2;
    return binomial(n_spins, k) - binomial(n_spins, k - 1);
}

std::vector<int> allowed_twice_j(int n_spins) {
    if (n_spins < 1) throw std::invalid_argument("dicke: n_spins must be >= 1");
    std::vector<int> out;
    for (int tj = n_spins; tj >= 0; tj -= 2) out.push_back(tj);
    return out;
}

double lowering_element(int n_spins, int twice_j, int e) {
    const double j = 0.5 * twice_j;
    const double m = e - 0.5 * n_spins;
    const double v = j * (j + 1.0) - m * (m - 1.0);
    return v > 0 ? std::sqrt(v) : 0.0;
}

std::vector<TransferChannel> local_decay_channels(int n_spins, int twice_j_from) {
    if (multiplicity(n_spins, twice_j_from) == 0) {
        throw std::invalid_argument("dicke: source irrep not present");
    }
    const int n = n_spins;
    const double j = 0.5 * twice_j_from;
    const double d_j = static_cast<double>(multiplicity(n, twice_j_from));

    // Parent decomposition over the last spin: copies of irrep j at n spins
    // split by the (n-1)-spin parent l in {j - 1/2, j + 1/2}; the sandwich
    // sum over sites and copies factorizes per (target j'', parent l) into
    // amp[e] = sqrt(n d^{n-1}_l / d^n_j'') * f_l(m), with f from the standard
    // l x 1/2 Clebsch-Gordan table.
    const double d_lo = static_cast<double>(multiplicity(n - 1, twice_j_from - 1));  // l = j - 1/2
    const double d_hi = static_cast<double>(multiplicity(n - 1, twice_j_from + 1));  // l = j + 1/2
    (void)d_j;

    std::vector<TransferChannel> channels;
    auto add_channel = [&](int twice_j_to, double d_parent, auto f_of_m) {
        if (d_parent == 0) return;
        const double d_to = static_cast<double>(multiplicity(n, twice_j_to));
        if (d_to == 0) return;
        TransferChannel ch;
        ch.twice_j_to = twice_j_to;
        ch.amp.assign(static_cast<size_t>(n) + 1, 0.0);
        const double scale = std::sqrt(static_cast<double>(n) * d_parent / d_to);
        const int e_lo = (n - twice_j_from) / 2;
        const int e_hi = (n + twice_j_from) / 2;
        for (int e = std::max(e_lo, 1); e <= e_hi; ++e) {
            const double m = e - 0.5 * n;
            ch.amp[static_cast<size_t>(e)] = scale * f_of_m(m);
        }
        bool any = false;
        for (double a : ch.amp) any = any || a != 0.0;
        if (any) channels.push_back(std::move(ch));
    };

    // j -> j + 1 via parent l = j + 1/2.
    add_channel(twice_j_from + 2, d_hi, [&](double m) {
        return -std::sqrt((j + 1.0 - m) * (j + 2.0 - m)) / (2.0 * j + 2.0);
    });
    // j -> j - 1 via parent l = j - 1/2.
    if (twice_j_from >= 2) {
        add_channel(twice_j_from - 2, d_lo, [&](double m) {
            return std::sqrt((j + m) * (j + m - 1.0)) / (2.0 * j);
        });
    }
    // j -> j, both parents contribute separately.
    add_channel(twice_j_from, d_hi, [&](double m) {
        return -std::sqrt((j + 1.0 - m) * (j + m)) / (2.0 * j + 2.0);
    });
    if (twice_j_from >= 1) {
        add_channel(twice_j_from, d_lo, [&](double m) {
            return std::sqrt((j + m) * (j + 1.0 - m)) / (2.0 * j);
        });
    }
    return channels;
}

}  // namespace dmtc::dicke
