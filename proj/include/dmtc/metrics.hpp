// metrics.hpp — Superradiance metrics: eigenstate superradiance and
// photon-generation fidelity.

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "dmtc/core.hpp"

namespace dmtc {

// Realization of the infinite upper integration limit of the fidelity metric:
// integrate until the residual excitation falls below residual_cutoff or
// max_time is reached. tol is the local integrator tolerance.
struct HorizonPolicy {
    double max_time = 200.0;
    double residual_cutoff = 1e-8;
    double tol = 1e-9;
};

struct FidelityResult {
    double value = 0.0;      // mu_FID = kappa * int |c_a|^2 dt
    std::vector<double> times;
    std::vector<double> emitted_flux;  // kappa |c_a(t)|^2 at the sample times
    double residual = 0.0;   // excitation remaining at the horizon
    double emitter_loss = 0.0;  // gamma * int sum_i |c_i|^2 dt
    double horizon = 0.0;
    bool truncated = false;  // stopped at max_time with residual > 100 * cutoff
};

struct EsResult {
    double value = 0.0;            // mu_ES
    Eigen::VectorXcd argmax_state;  // maximizing (projected) eigenstate
    Eigen::VectorXd spectrum;       // per-eigenstate overlap; degenerate blocks share one value
};

// mu_ES of the unmodulated system: diagonalizes the Hermitian single-photon
// Hamiltonian (omega_c = 0, decays off) and maximizes |sum_i phi_i|^2 over the
// emitter components of the eigenstates. Within a degenerate block the overlap
// is the squared norm of the projected symmetric vector (basis independent).
EsResult eigenstate_superradiance_static(const SystemConfig& config);

// mu_ES of the modulated system: same overlap maximized over eigenstates of
// the coherent propagator over the pulse duration.
EsResult eigenstate_superradiance_modulated(const SystemConfig& config, const Pulse& pulse,
                                            double tol = 1e-9);

// mu_FID: evolves the symmetric initial state under H_eff(t) and integrates
// the output flux kappa|c_a|^2 with the same quadrature order as the stepper.
FidelityResult photon_fidelity(const SystemConfig& config, const Pulse& pulse,
                               const HorizonPolicy& policy = {});

// Candidate stop times shared by photon_fidelity and the adjoint forward pass:
// pulse segment boundaries, then fixed chunks after the pulse, ending exactly
// at policy.max_time. The residual-cutoff rule is evaluated only at these.
std::vector<double> horizon_grid(const Pulse& pulse, const HorizonPolicy& policy, double kappa);

}  // namespace dmtc
