#include "dmtc/large_n.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc {

namespace {

// Forward RHS on y = [alpha, beta, F, S, W].
void effective_rhs(const LargeNParams& p, double omega_c, double t,
                   const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
    const cd i1(0.0, 1.0);
    const double env = p.drive_scale * std::exp(-p.delta0 * t);
    dy[0] = -(i1 * omega_c + 0.5 * p.kappa) * y[0] - p.G * y[1] - i1 * p.G * env;
    dy[1] = p.G * y[0] - p.delta0 * y[1];
    dy[2] = p.kappa * std::norm(y[0]);
    dy[3] = 2.0 * p.delta0 * std::norm(y[1]);
    dy[4] = -2.0 * p.G * env * std::imag(y[0]);
}

// Backward RHS on y = [alpha, beta, l_alpha, l_beta, acc] with
// dl/dt = -A^dag l - kappa alpha e_alpha and acc integrating Im(conj(l_a) a).
void effective_adjoint_rhs(const LargeNParams& p, double omega_c, double t,
                           const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
    const cd i1(0.0, 1.0);
    const double env = p.drive_scale * std::exp(-p.delta0 * t);
    dy[0] = -(i1 * omega_c + 0.5 * p.kappa) * y[0] - p.G * y[1] - i1 * p.G * env;
    dy[1] = p.G * y[0] - p.delta0 * y[1];
    dy[2] = (0.5 * p.kappa - i1 * omega_c) * y[2] - p.G * y[3] - p.kappa * y[0];
    dy[3] = p.G * y[2] + p.delta0 * y[3];
    dy[4] = std::imag(std::conj(y[2]) * y[0]);
}

// Stop once both the retained excitation and the remaining drive are gone.
bool effectively_done(const LargeNParams& p, double t, const Eigen::VectorXcd& y,
                      double cutoff) {
    const double residual = std::norm(y[0]) + std::norm(y[1]);
    if (residual >= cutoff) return false;
    if (p.G == 0.0) return true;
    const double drive = 2.0 * p.G * std::abs(p.drive_scale) * std::exp(-p.delta0 * t) / p.kappa;
    return drive * drive < cutoff;
}

}  // namespace

void LargeNParams::validate() const {
    if (!(G >= 0) || !std::isfinite(G)) throw std::invalid_argument("LargeNParams: G must be >= 0");
    if (!(delta0 >= 0) || !std::isfinite(delta0)) {
        throw std::invalid_argument("LargeNParams: delta0 must be >= 0");
    }
    if (!(kappa > 0) || !std::isfinite(kappa)) throw std::invalid_argument("LargeNParams: kappa must be > 0");
    if (!std::isfinite(drive_scale)) throw std::invalid_argument("LargeNParams: drive_scale must be finite");
}

LargeNTrajectory evolve_effective(const LargeNParams& params, const Pulse& pulse,
                                  double horizon, double tol) {
    params.validate();
    pulse.validate();
    if (!(horizon > 0)) throw std::invalid_argument("evolve_effective: horizon must be > 0");

    LargeNTrajectory traj;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(5);
    ode::StepControl ctl{tol, 0, 0};
    integrate_piecewise(
        pulse, y, 0.0, horizon, ctl,
        [&](double wc) {
            return [&params, wc](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                effective_rhs(params, wc, t, v, dv);
            };
        },
        [&](double t, const Eigen::VectorXcd& v) {
            traj.times.push_back(t);
            traj.states.push_back({v[0], v[1], std::exp(-params.delta0 * t)});
            traj.flux.push_back(params.kappa * std::norm(v[0]));
        });
    return traj;
}

EffectiveResult effective_run(const LargeNParams& params, const Pulse& pulse,
                              const HorizonPolicy& policy) {
    params.validate();
    pulse.validate();

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(5);
    ode::StepControl ctl{policy.tol, 0, 0};

    EffectiveResult res;
    double prev = 0.0;
    bool stopped = false;
    for (double t_stop : horizon_grid(pulse, policy, params.kappa)) {
        integrate_piecewise(
            pulse, y, prev, t_stop, ctl,
            [&](double wc) {
                return [&params, wc](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                    effective_rhs(params, wc, t, v, dv);
                };
            },
            [](double, const Eigen::VectorXcd&) {});
        prev = t_stop;
        res.horizon = t_stop;
        if (effectively_done(params, t_stop, y, policy.residual_cutoff)) {
            stopped = true;
            break;
        }
    }

    res.fidelity = y[2].real();
    res.subradiant = y[3].real();
    res.injected = y[4].real();
    res.residual = std::norm(y[0]) + std::norm(y[1]);
    res.truncated = !stopped && res.residual > 100.0 * policy.residual_cutoff;
    return res;
}

double effective_fidelity(const LargeNParams& params, const Pulse& pulse,
                          const HorizonPolicy& policy) {
    return effective_run(params, pulse, policy).fidelity;
}

double subradiant_occupation(const LargeNParams& params, const Pulse& pulse,
                             const HorizonPolicy& policy) {
    return effective_run(params, pulse, policy).subradiant;
}

PulseObjective make_effective_objective(const LargeNParams& params, const HorizonPolicy& policy) {
    params.validate();

    PulseObjective obj;
    obj.value = [params, policy](const Pulse& p) { return effective_fidelity(params, p, policy); };
    obj.gradient = [params, policy](const Pulse& pulse, double* value_out) {
        pulse.validate();
        ode::StepControl ctl{policy.tol, 0, 0};

        // Forward with checkpoints (cheap 2x2 system, same scheme as the
        // single-photon adjoint).
        const double max_ck = 0.5 / params.kappa;
        std::vector<double> ck_t{0.0};
        std::vector<Eigen::Vector2cd> ck_s{Eigen::Vector2cd::Zero()};

        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(5);
        double prev = 0.0;
        for (double t_stop : horizon_grid(pulse, policy, params.kappa)) {
            const int pieces = std::max(1, static_cast<int>(std::ceil((t_stop - prev) / max_ck)));
            for (int q = 0; q < pieces; ++q) {
                const double a = prev + (t_stop - prev) * q / pieces;
                const double b = prev + (t_stop - prev) * (q + 1) / pieces;
                integrate_piecewise(
                    pulse, y, a, b, ctl,
                    [&](double wc) {
                        return [&params, wc](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                            effective_rhs(params, wc, t, v, dv);
                        };
                    },
                    [](double, const Eigen::VectorXcd&) {});
                ck_t.push_back(b);
                ck_s.push_back(y.head<2>());
            }
            prev = t_stop;
            if (effectively_done(params, t_stop, y, policy.residual_cutoff)) break;
        }
        if (value_out) *value_out = y[2].real();

        const int m = pulse.segments();
        const double seg_len = pulse.segment_length();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
        Eigen::VectorXcd yb = Eigen::VectorXcd::Zero(5);
        for (size_t k = ck_t.size() - 1; k >= 1; --k) {
            yb.head<2>() = ck_s[k];
            yb[4] = 0.0;
            integrate_piecewise(
                pulse, yb, ck_t[k], ck_t[k - 1], ctl,
                [&](double wc) {
                    return [&params, wc](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                        effective_adjoint_rhs(params, wc, t, v, dv);
                    };
                },
                [](double, const Eigen::VectorXcd&) {});
            const double tm = 0.5 * (ck_t[k] + ck_t[k - 1]);
            if (tm < pulse.duration) {
                const int seg = std::min(static_cast<int>(tm / seg_len), m - 1);
                grad[seg] += -2.0 * yb[4].real();
            }
        }
        if (!grad.allFinite()) throw std::runtime_error("effective gradient: non-finite");
        return grad;
    };
    return obj;
}

std::vector<double> default_delta0_grid() {
    return {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
}

std::vector<ImprovementCell> improvement_scan(const std::vector<double>& g_list,
                                              const std::vector<double>& delta0_list,
                                              const Pulse& pulse_shape,
                                              const OptimizationOptions& opts,
                                              double kappa) {
    if (g_list.empty() || delta0_list.empty()) {
        throw std::invalid_argument("improvement_scan: empty parameter list");
    }
    std::vector<ImprovementCell> cells;
    cells.reserve(g_list.size() * delta0_list.size());
    for (double g : g_list) {
        for (double d0 : delta0_list) {
            const LargeNParams params{g, d0, kappa};
            const auto objective = make_effective_objective(params, opts.horizon);
            ImprovementCell cell;
            cell.G = g;
            cell.delta0 = d0;
            cell.fid_zero = objective.value(Pulse::zero_like(pulse_shape));
            const auto rec = optimize_pulse(objective, Pulse::zero_like(pulse_shape), opts);
            cell.fid_opt = rec.objective_final;
            cell.stalled = rec.stalled;
            cell.ratio = (cell.fid_zero > 0) ? cell.fid_opt / cell.fid_zero : 1.0;
            cells.push_back(cell);
        }
    }
    return cells;
}

}  // namespace dmtc
