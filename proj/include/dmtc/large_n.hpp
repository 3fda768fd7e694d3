// large_n.hpp — Effective coupled-oscillator model of the N -> infinity limit
// with a Lorentzian frequency distribution of half-width delta0:
//
//   d/dt [alpha; beta] = [[-(i w_c(t) + kappa/2), -G], [G, -delta0]] [alpha; beta]
//                        - i G [exp(-delta0 t); 0],   alpha(0) = beta(0) = 0.
//
// alpha is the cavity amplitude, beta the superradiant-mode amplitude; the
// inhomogeneous broadening damps beta (transfer into subradiant states) and the
// drive carries the initial symmetric excitation, dephasing at delta0.

#pragma once

#include <vector>

#include "dmtc/core.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/pulse_opt.hpp"

namespace dmtc {

struct LargeNParams {
    double G = 1.0;       // collective coupling lim g(N) sqrt(N), units of kappa
    double delta0 = 1.0;  // Lorentzian half-width, units of kappa
    double kappa = 1.0;
    double drive_scale = 1.0;  // scales the inhomogeneous drive only (linearity checks)

    void validate() const;
};

struct LargeNState {
    cd alpha{0.0, 0.0};
    cd beta{0.0, 0.0};
    double envelope = 1.0;  // drive envelope exp(-delta0 t)
};

struct LargeNTrajectory {
    std::vector<double> times;
    std::vector<LargeNState> states;
    std::vector<double> flux;  // kappa |alpha(t)|^2
};

struct EffectiveResult {
    double fidelity = 0.0;    // kappa * int |alpha|^2 dt
    double subradiant = 0.0;  // 2 * delta0 * int |beta|^2 dt
    double injected = 0.0;    // -2G * int exp(-delta0 t) Im(alpha) dt
    double residual = 0.0;    // |alpha|^2 + |beta|^2 at the horizon
    double horizon = 0.0;
    bool truncated = false;
};

LargeNTrajectory evolve_effective(const LargeNParams& params, const Pulse& pulse,
                                  double horizon, double tol = 1e-9);

// All integrals of one run in a single pass under the horizon policy. The stop
// rule additionally waits for the drive envelope to die out, so the metric is
// not cut off while excitation is still being injected.
EffectiveResult effective_run(const LargeNParams& params, const Pulse& pulse,
                              const HorizonPolicy& policy = {});

double effective_fidelity(const LargeNParams& params, const Pulse& pulse,
                          const HorizonPolicy& policy = {});

double subradiant_occupation(const LargeNParams& params, const Pulse& pulse,
                             const HorizonPolicy& policy = {});

// Adjoint-differentiable effective-model fidelity, pluggable into optimize_pulse.
PulseObjective make_effective_objective(const LargeNParams& params,
                                        const HorizonPolicy& policy = {});

struct ImprovementCell {
    double G = 0.0;
    double delta0 = 0.0;
    double fid_zero = 0.0;
    double fid_opt = 0.0;
    double ratio = 1.0;
    bool stalled = false;
};

// Optimized/unmodulated fidelity ratio over a (G, delta0) grid. The zero pulse
// is a stationary point of the symmetric effective model, so cells rely on the
// seeded perturbed restarts configured in opts to escape it.
std::vector<ImprovementCell> improvement_scan(const std::vector<double>& g_list,
                                              const std::vector<double>& delta0_list,
                                              const Pulse& pulse_shape,
                                              const OptimizationOptions& opts,
                                              double kappa = 1.0);

// Default delta0 grid of the improvement scan.
std::vector<double> default_delta0_grid();

}  // namespace dmtc
