// core.hpp — Dynamically modulated Tavis-Cummings model, single-excitation sector.
//
// N two-level emitters exchange one excitation with a cavity mode whose
// frequency omega_c(t) is controlled by a piecewise-constant pulse. The cavity
// leaks into an output channel at rate kappa and each emitter decays externally
// at rate gamma; within the one-excitation sector both losses act as
// non-Hermitian diagonal terms (quantum jumps leave the sector). All rates are
// in units of kappa, times in 1/kappa.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

#include "dmtc/ode.hpp"

namespace dmtc {

using cd = std::complex<double>;

struct Coupling {
    enum class Kind { Constant, SqrtScaled };
    Kind kind = Kind::Constant;
    double value = 0.0;  // g for Constant, G for SqrtScaled (g(N) = G/sqrt(N))

    static Coupling constant(double g) { return {Kind::Constant, g}; }
    static Coupling sqrt_scaled(double G) { return {Kind::SqrtScaled, G}; }

    double of(int n_emitters) const;
};

struct SystemConfig {
    int n_emitters = 0;
    std::vector<double> emitter_freqs;  // omega_i
    Coupling coupling;
    double kappa = 1.0;
    double gamma = 0.0;

    double g() const { return coupling.of(n_emitters); }
    int dim() const { return n_emitters + 1; }
    void validate() const;  // throws std::invalid_argument
};

// Piecewise-constant cavity detuning: omega_c(t) = values[k] on the k-th of M
// equal segments of [0, duration), and 0 afterwards.
struct Pulse {
    double duration = 10.0;
    std::vector<double> values;

    static Pulse zero(double duration = 10.0, int segments = 100);
    static Pulse zero_like(const Pulse& p) { return zero(p.duration, static_cast<int>(p.values.size())); }

    int segments() const { return static_cast<int>(values.size()); }
    double segment_length() const { return duration / static_cast<double>(values.size()); }
    double omega_c(double t) const;
    bool is_zero() const;
    void validate() const;
};

// Amplitudes in the one-excitation sector; index 0 is the cavity, 1..N the emitters.
struct SinglePhotonState {
    Eigen::VectorXcd amplitudes;
    double squared_norm() const { return amplitudes.squaredNorm(); }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> states;
    std::vector<double> flux;  // kappa * |c_a(t)|^2
};

enum class Decay { Physical, Coherent };  // Coherent: kappa = gamma = 0 override

// H_eff(t): arrowhead matrix with omega_c(t) - i*kappa/2 on the cavity diagonal,
// omega_i - i*gamma/2 on the emitter diagonal and g(N) on the cavity row/column.
Eigen::MatrixXcd effective_hamiltonian(const SystemConfig& config, const Pulse& pulse, double t);

// Symmetric one-excitation emitter state: c_a = 0, c_i = 1/sqrt(N).
SinglePhotonState symmetric_state(int n_emitters);

// Integrates i dc/dt = H_eff(t) c over [t0, t1]; sample points are the accepted
// integrator steps, never straddling a pulse segment boundary.
Trajectory evolve(const SystemConfig& config, const Pulse& pulse,
                  const SinglePhotonState& initial, double t0, double t1,
                  double tol = 1e-9);

// Time-ordered propagator over [0, T]: columns are the evolved basis states.
// The coherent variant turns decays off and is unitary to integrator tolerance.
Eigen::MatrixXcd propagator(const SystemConfig& config, const Pulse& pulse, double T,
                            Decay decay = Decay::Physical, double tol = 1e-9);

// Pulse segment boundaries strictly between t0 and t1, ordered from t0 toward
// t1 (descending when t1 < t0). Shared by every integration loop so that no
// step crosses a discontinuity of omega_c.
std::vector<double> pulse_breakpoints(const Pulse& pulse, double t0, double t1);

// Cumulative pulse phase Phi(t) = int_0^t omega_c(s) ds; piecewise linear and
// constant past the pulse duration.
class PulsePhase {
public:
    explicit PulsePhase(const Pulse& p)
        : seg_(p.segment_length()), dur_(p.duration), vals_(p.values), cum_(p.values.size() + 1, 0.0) {
        for (size_t k = 0; k < vals_.size(); ++k) cum_[k + 1] = cum_[k] + vals_[k] * seg_;
    }
    double operator()(double t) const {
        if (t <= 0) return 0.0;
        if (t >= dur_) return cum_.back();
        const int k = std::min(static_cast<int>(t / seg_), static_cast<int>(vals_.size()) - 1);
        return cum_[static_cast<size_t>(k)] + vals_[static_cast<size_t>(k)] * (t - k * seg_);
    }

private:
    double seg_;
    double dur_;
    std::vector<double> vals_;
    std::vector<double> cum_;
};

namespace detail {

// dy[0..n] = -i * H_eff * y[0..n] for fixed omega_c; entries past n+1 are left
// untouched. O(N) via the arrowhead structure.
inline void apply_schrodinger(const SystemConfig& cfg, double omega_c, bool coherent,
                              const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
    const int n = cfg.n_emitters;
    const double g = cfg.g();
    const double hk = coherent ? 0.0 : 0.5 * cfg.kappa;
    const double hg = coherent ? 0.0 : 0.5 * cfg.gamma;
    const cd mi(0.0, -1.0);

    cd esum(0.0, 0.0);
    for (int i = 1; i <= n; ++i) esum += y[i];
    dy[0] = mi * (cd(omega_c, -hk) * y[0] + g * esum);
    const cd gy0 = g * y[0];
    for (int i = 1; i <= n; ++i) {
        dy[i] = mi * (cd(cfg.emitter_freqs[static_cast<size_t>(i - 1)], -hg) * y[i] + gy0);
    }
}

}  // namespace detail

// Integrates y over [t0, t1], splitting at pulse boundaries. make_rhs(omega_c)
// must return the RHS functor for a constant-omega_c piece.
template <class MakeRhs, class Observer>
void integrate_piecewise(const Pulse& pulse, Eigen::VectorXcd& y, double t0, double t1,
                         const ode::StepControl& ctl, MakeRhs&& make_rhs, Observer&& obs) {
    const auto cuts = pulse_breakpoints(pulse, t0, t1);
    double a = t0;
    bool first = true;
    auto run = [&](double from, double to) {
        if (from == to) return;
        auto rhs = make_rhs(pulse.omega_c(0.5 * (from + to)));
        // Emit the initial sample only once across pieces.
        if (first) {
            ode::integrate(rhs, y, from, to, ctl, obs);
            first = false;
        } else {
            bool skip = true;
            ode::integrate(rhs, y, from, to, ctl,
                           [&](double t, const Eigen::VectorXcd& v) {
                               if (skip) { skip = false; return; }
                               obs(t, v);
                           });
        }
    };
    for (double b : cuts) {
        run(a, b);
        a = b;
    }
    run(a, t1);
    if (first) obs(t0, y);  // degenerate span
}

}  // namespace dmtc
