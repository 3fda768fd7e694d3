// pulse_opt.hpp — Exact adjoint gradients of the photon-generation fidelity
// with respect to the pulse parameters, and gradient-based pulse optimization.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "dmtc/core.hpp"
#include "dmtc/metrics.hpp"

namespace dmtc {

struct OptimizationOptions {
    enum class Method { AdaptiveFirstOrder, Lbfgs };

    int max_iters = 200;
    double gradient_tolerance = 1e-6;
    Method method = Method::AdaptiveFirstOrder;
    double initial_step = 0.5;       // first trial step scale
    double theta_min = -20.0;        // pulse bounds, units of kappa
    double theta_max = 20.0;
    double smoothness_weight = 0.0;  // lambda_s on sum (theta_{k+1}-theta_k)^2
    int restarts = 0;                // extra runs from seeded perturbed starts
    std::uint64_t restart_seed = 1;
    double restart_scale = 1.0;
    HorizonPolicy horizon{};

    void validate() const;
};

struct OptimizationRecord {
    Pulse initial;
    Pulse optimized;
    // Penalized objective (J - lambda_s * roughness) at the start and after
    // each accepted step; non-decreasing by construction.
    std::vector<double> objective_history;
    double final_gradient_norm = 0.0;
    double objective_final = 0.0;      // raw objective at the optimized pulse
    double objective_zero_pulse = 0.0;
    double improvement_ratio = 1.0;    // objective_final / objective_zero_pulse
    int iterations = 0;
    bool stalled = false;              // line search failed; best-so-far returned
};

// A differentiable pulse objective. value() and gradient() must evaluate the
// same functional; gradient() also reports the objective through value_out.
struct PulseObjective {
    std::function<double(const Pulse&)> value;
    std::function<Eigen::VectorXd(const Pulse&, double* value_out)> gradient;
};

// dJ/dtheta_k for J = mu_FID under the horizon policy, via a checkpointed
// forward pass and a backward costate pass. The only theta-dependent entry of
// H_eff is the cavity diagonal, so each segment accumulates
// 2 * Im int_seg conj(lambda_a) c_a dt.
Eigen::VectorXd fidelity_gradient(const SystemConfig& config, const Pulse& pulse,
                                  const HorizonPolicy& policy = {},
                                  double* value_out = nullptr);

PulseObjective make_fidelity_objective(const SystemConfig& config,
                                       const HorizonPolicy& policy = {});

// Projected gradient ascent on the penalized objective with monotone step
// acceptance; method and restart behavior per OptimizationOptions.
OptimizationRecord optimize_pulse(const PulseObjective& objective, const Pulse& initial,
                                  const OptimizationOptions& opts);

// Convenience overload for the single-photon fidelity objective.
OptimizationRecord optimize_pulse(const SystemConfig& config, const Pulse& initial,
                                  const OptimizationOptions& opts);

}  // namespace dmtc
