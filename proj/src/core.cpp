#include "dmtc/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dmtc {

double Coupling::of(int n_emitters) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::SqrtScaled:
            return value / std::sqrt(static_cast<double>(n_emitters));
    }
    throw std::invalid_argument("Coupling: unknown kind");
}

void SystemConfig::validate() const {
    if (n_emitters < 1) throw std::invalid_argument("SystemConfig: n_emitters must be >= 1");
    if (static_cast<int>(emitter_freqs.size()) != n_emitters) {
        throw std::invalid_argument("SystemConfig: emitter_freqs must have exactly N entries");
    }
    for (double w : emitter_freqs) {
        if (!std::isfinite(w)) throw std::invalid_argument("SystemConfig: non-finite emitter frequency");
    }
    const double gval = g();
    if (!std::isfinite(gval) || gval < 0) {
        throw std::invalid_argument("SystemConfig: coupling g(N) must be finite and >= 0");
    }
    if (!std::isfinite(kappa) || kappa <= 0) throw std::invalid_argument("SystemConfig: kappa must be > 0");
    if (!std::isfinite(gamma) || gamma < 0) throw std::invalid_argument("SystemConfig: gamma must be >= 0");
}

Pulse Pulse::zero(double duration, int segments) {
    Pulse p;
    p.duration = duration;
    p.values.assign(static_cast<size_t>(segments), 0.0);
    return p;
}

double Pulse::omega_c(double t) const {
    if (t < 0 || t >= duration) return 0.0;
    const auto m = static_cast<int>(values.size());
    int k = static_cast<int>(t / segment_length());
    k = std::min(k, m - 1);
    return values[static_cast<size_t>(k)];
}

bool Pulse::is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void Pulse::validate() const {
    if (!(duration > 0) || !std::isfinite(duration)) {
        throw std::invalid_argument("Pulse: duration must be positive and finite");
    }
    if (values.empty()) throw std::invalid_argument("Pulse: needs at least one segment");
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("Pulse: non-finite segment value");
    }
}

std::vector<double> pulse_breakpoints(const Pulse& pulse, double t0, double t1) {
    pulse.validate();
    std::vector<double> cuts;
    const double lo = std::min(t0, t1);
    const double hi = std::max(t0, t1);
    const double seg = pulse.segment_length();
    const int m = pulse.segments();
    // Boundaries k*seg for k = 1..M; omega_c is identically 0 past duration.
    int k_first = static_cast<int>(std::ceil(lo / seg));
    k_first = std::max(k_first, 1);
    for (int k = k_first; k <= m; ++k) {
        const double b = (k == m) ? pulse.duration : k * seg;
        if (b > lo && b < hi) cuts.push_back(b);
        if (b >= hi) break;
    }
    if (t1 < t0) std::reverse(cuts.begin(), cuts.end());
    return cuts;
}

Eigen::MatrixXcd effective_hamiltonian(const SystemConfig& config, const Pulse& pulse, double t) {
    config.validate();
    pulse.validate();
    if (t < 0) throw std::invalid_argument("effective_hamiltonian: t must be >= 0");

    const int n = config.n_emitters;
    const double g = config.g();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n + 1, n + 1);
    h(0, 0) = cd(pulse.omega_c(t), -0.5 * config.kappa);
    for (int i = 1; i <= n; ++i) {
        h(i, i) = cd(config.emitter_freqs[static_cast<size_t>(i - 1)], -0.5 * config.gamma);
        h(0, i) = g;
        h(i, 0) = g;
    }
    return h;
}

SinglePhotonState symmetric_state(int n_emitters) {
    if (n_emitters < 1) throw std::invalid_argument("symmetric_state: N must be >= 1");
    SinglePhotonState s;
    s.amplitudes = Eigen::VectorXcd::Zero(n_emitters + 1);
    const double a = 1.0 / std::sqrt(static_cast<double>(n_emitters));
    for (int i = 1; i <= n_emitters; ++i) s.amplitudes[i] = a;
    return s;
}

Trajectory evolve(const SystemConfig& config, const Pulse& pulse,
                  const SinglePhotonState& initial, double t0, double t1, double tol) {
    config.validate();
    pulse.validate();
    if (!(t1 > t0) || t0 < 0) throw std::invalid_argument("evolve: need t1 > t0 >= 0");
    if (!(tol > 0)) throw std::invalid_argument("evolve: tol must be > 0");
    if (initial.amplitudes.size() != config.dim()) {
        throw std::invalid_argument("evolve: state dimension mismatch");
    }

    Trajectory traj;
    Eigen::VectorXcd y = initial.amplitudes;
    // The per-step control is tightened so that the accumulated error over the
    // whole trajectory stays within a small multiple of tol.
    ode::StepControl ctl{0.01 * tol, 0, 0};
    integrate_piecewise(
        pulse, y, t0, t1, ctl,
        [&](double wc) {
            return [&config, wc](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                detail::apply_schrodinger(config, wc, false, v, dv);
            };
        },
        [&](double t, const Eigen::VectorXcd& v) {
            traj.times.push_back(t);
            traj.states.push_back(v);
            traj.flux.push_back(config.kappa * std::norm(v[0]));
        });
    return traj;
}

Eigen::MatrixXcd propagator(const SystemConfig& config, const Pulse& pulse, double T,
                            Decay decay, double tol) {
    config.validate();
    pulse.validate();
    if (!(T > 0)) throw std::invalid_argument("propagator: T must be > 0");

    const bool coherent = (decay == Decay::Coherent);
    const int d = config.dim();
    Eigen::MatrixXcd u(d, d);
    ode::StepControl ctl{0.01 * tol, 0, 0};
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(d);
        y[j] = 1.0;
        integrate_piecewise(
            pulse, y, 0.0, T, ctl,
            [&](double wc) {
                return [&config, wc, coherent](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                    detail::apply_schrodinger(config, wc, coherent, v, dv);
                };
            },
            [](double, const Eigen::VectorXcd&) {});
        u.col(j) = y;
    }
    return u;
}

}  // namespace dmtc
