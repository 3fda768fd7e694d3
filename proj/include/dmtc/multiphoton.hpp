// multiphoton.hpp — Multi-excitation dynamics from the fully inverted state:
// exact Lindblad evolution of the full cavity x emitter space for small N, and
// a permutation-invariant collective solver for emitters binned into a few
// discrete frequencies. Both report the per-excitation emission fidelity
// kappa * int <a^dag a> dt / N.

#pragma once

#include <vector>

#include "dmtc/core.hpp"
#include "dmtc/metrics.hpp"

namespace dmtc {

struct FockTruncation {
    int n_max = 0;
    bool monitor_leakage = true;
    double leakage_threshold = 1e-6;

    // n_max must cover the initial excitation unless leakage monitoring is on.
    void validate(int total_excitations) const;
};

struct EmitterBin {
    double freq = 0.0;
    int count = 0;
};

struct BinnedEnsemble {
    std::vector<EmitterBin> bins;

    int total() const;
    void validate() const;  // 1..4 bins, positive counts
    // Groups a frequency list into bins of (almost) equal entries.
    static BinnedEnsemble from_frequencies(const std::vector<double>& freqs, double tol = 1e-9);
};

struct MultiphotonResult {
    double value = 0.0;          // per-excitation emission fidelity
    double flux_integral = 0.0;  // kappa * int <a^dag a> dt
    double emitter_loss = 0.0;   // gamma * int sum_i <sigma_i^dag sigma_i> dt
    double residual = 0.0;       // excitation remaining at the horizon
    double leakage = 0.0;        // max population of the top Fock level
    bool leak_flagged = false;
    bool truncated = false;
    double horizon = 0.0;
};

// Lindblad master equation over (Fock space up to n_max) x (2^N emitter
// states) from the all-inverted state, with D[a] at rate kappa and D[sigma_i]
// at rate gamma. Guarded to N <= 8. final_rho, when given, receives the
// density matrix at the horizon (basis index n * 2^N + spin mask).
MultiphotonResult exact_full_fidelity(const SystemConfig& config, const Pulse& pulse,
                                      const FockTruncation& trunc,
                                      const HorizonPolicy& policy = {},
                                      Eigen::MatrixXcd* final_rho = nullptr);

namespace detail {

// One application of the full-space Lindblad generator at pulse time t
// (verification support for the sector-restriction and trace identities).
Eigen::MatrixXcd lindblad_apply(const SystemConfig& config, const Pulse& pulse, double t,
                                int n_max, const Eigen::MatrixXcd& rho);

}  // namespace detail

// Same observable computed in the permutation-symmetric representation: one
// Dicke ladder stack per frequency bin, with the local-decay-induced j-block
// mixing included. When gamma = 0 only the maximal-j ladders are evolved.
MultiphotonResult binned_fidelity(const BinnedEnsemble& ensemble, const Coupling& coupling,
                                  double kappa, double gamma, const Pulse& pulse,
                                  const FockTruncation& trunc,
                                  const HorizonPolicy& policy = {});

// Divides a raw per-excitation fidelity by the homogeneous reference: same
// (N, coupling, kappa, gamma, horizon) with every emitter at the mean of
// config.emitter_freqs, unmodulated unless baseline_pulse says otherwise.
double normalized_fidelity(double raw, const SystemConfig& config, const FockTruncation& trunc,
                           const HorizonPolicy& policy = {},
                           const Pulse& baseline_pulse = Pulse::zero());

}  // namespace dmtc
