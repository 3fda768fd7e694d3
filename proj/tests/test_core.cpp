#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmtc/core.hpp"
#include "dmtc/rng.hpp"
#include "oracles.hpp"

using namespace dmtc;

namespace {

SystemConfig make_config(int n, std::vector<double> freqs, Coupling c, double gamma = 0.0) {
    SystemConfig cfg;
    cfg.n_emitters = n;
    cfg.emitter_freqs = std::move(freqs);
    cfg.coupling = c;
    cfg.gamma = gamma;
    return cfg;
}

SystemConfig random_config(int n, SplitMix64& rng, double gamma = 0.0) {
    std::vector<double> freqs(static_cast<size_t>(n));
    for (double& f : freqs) f = rng.uniform(-4.0, 4.0);
    return make_config(n, std::move(freqs), Coupling::constant(rng.uniform(0.2, 1.5)), gamma);
}

}  // namespace

TEST_CASE("effective hamiltonian entries") {
    const auto cfg = make_config(1, {0.0}, Coupling::constant(1.0));
    const auto h = effective_hamiltonian(cfg, Pulse::zero(), 0.0);
    CHECK(h(0, 0) == cd(0.0, -0.5));
    CHECK(h(0, 1) == cd(1.0, 0.0));
    CHECK(h(1, 0) == cd(1.0, 0.0));
    CHECK(h(1, 1) == cd(0.0, 0.0));
}

TEST_CASE("cavity diagonal follows the pulse segments exactly") {
    Pulse p;
    p.duration = 2.0;
    p.values = {1.0, -3.0, 0.5, 7.0};
    const auto cfg = make_config(2, {0.3, -0.4}, Coupling::constant(0.7), 0.2);
    for (int k = 0; k < 4; ++k) {
        const double t = (k + 0.5) * p.segment_length();
        const auto h = effective_hamiltonian(cfg, p, t);
        CHECK(h(0, 0).real() == p.values[static_cast<size_t>(k)]);
        CHECK(h(0, 0).imag() == -0.5);
        CHECK(h(1, 1) == cd(0.3, -0.1));
    }
    CHECK(effective_hamiltonian(cfg, p, 2.5)(0, 0).real() == 0.0);
}

TEST_CASE("sqrt-scaled coupling gives G/sqrt(N)") {
    const auto cfg = make_config(3, {-1.0, 0.0, 1.0}, Coupling::sqrt_scaled(1.0));
    const auto h = effective_hamiltonian(cfg, Pulse::zero(), 0.0);
    for (int i = 1; i <= 3; ++i) {
        CHECK(h(0, i).real() == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(make_config(0, {}, Coupling::constant(1)).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(2, {0.0}, Coupling::constant(1)).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(1, {NAN}, Coupling::constant(1)).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_config(1, {0.0}, Coupling::constant(-1)).validate(), std::invalid_argument);
    auto bad_kappa = make_config(1, {0.0}, Coupling::constant(1));
    bad_kappa.kappa = 0.0;
    CHECK_THROWS_AS(bad_kappa.validate(), std::invalid_argument);
    auto bad_gamma = make_config(1, {0.0}, Coupling::constant(1));
    bad_gamma.gamma = -0.1;
    CHECK_THROWS_AS(bad_gamma.validate(), std::invalid_argument);

    Pulse empty;
    empty.values.clear();
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("symmetric state") {
    const auto s1 = symmetric_state(1);
    CHECK(s1.amplitudes[0] == cd(0, 0));
    CHECK(s1.amplitudes[1] == cd(1, 0));
    const auto s4 = symmetric_state(4);
    for (int i = 1; i <= 4; ++i) CHECK(s4.amplitudes[i] == cd(0.5, 0.0));
    for (int n : {1, 2, 3, 7, 25}) {
        CHECK(symmetric_state(n).squared_norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(symmetric_state(0), std::invalid_argument);
}

TEST_CASE("decoupled lossless emitter stays put") {
    auto cfg = make_config(1, {0.7}, Coupling::constant(0.0));
    const auto traj = evolve(cfg, Pulse::zero(), symmetric_state(1), 0.0, 20.0, 1e-10);
    for (const auto& s : traj.states) {
        CHECK(std::abs(std::abs(s[1]) - 1.0) < 1e-10);
        CHECK(std::abs(s[0]) < 1e-12);
    }
}

TEST_CASE("damped Rabi oscillation matches the matrix-exponential oracle") {
    auto cfg = make_config(1, {0.0}, Coupling::constant(0.8));
    const auto h = effective_hamiltonian(cfg, Pulse::zero(), 0.0);
    for (double t : {0.5, 1.7, 4.0, 9.3}) {
        const auto traj = evolve(cfg, Pulse::zero(), symmetric_state(1), 0.0, t, 1e-11);
        const auto ref = oracles::expm_evolve(h, symmetric_state(1).amplitudes, t);
        CHECK((traj.states.back() - ref).norm() < 1e-8);
    }
}

TEST_CASE("lossless evolution conserves the norm") {
    SplitMix64 rng(11);
    auto cfg = random_config(5, rng);
    Pulse p;
    p.duration = 20.0;
    p.values = {2.0, -1.0, 0.5, 3.0, -2.5};
    const double tol = 1e-9;
    // kappa enters through the non-Hermitian diagonal only; zero it via gamma=0
    // and a coherent-style config with kappa -> effectively removed is not
    // expressible, so check the propagator instead plus a gamma=0, kappa=0-like
    // bound: evolve with decays off through the coherent propagator columns.
    const auto u = propagator(cfg, p, 50.0, Decay::Coherent, tol);
    const auto s0 = symmetric_state(5).amplitudes;
    CHECK(std::abs((u * s0).norm() - 1.0) < 10 * tol);
}

TEST_CASE("norm decays monotonically with losses") {
    SplitMix64 rng(12);
    auto cfg = random_config(4, rng, 0.3);
    const auto traj = evolve(cfg, Pulse::zero(), symmetric_state(4), 0.0, 30.0, 1e-9);
    for (size_t i = 1; i < traj.states.size(); ++i) {
        CHECK(traj.states[i].squaredNorm() <= traj.states[i - 1].squaredNorm() + 1e-12);
    }
    CHECK(traj.states.back().squaredNorm() < 0.5);
}

TEST_CASE("global detuning shift leaves |c_a| unchanged") {
    SplitMix64 rng(13);
    auto cfg = random_config(4, rng, 0.2);
    Pulse p;
    p.duration = 16.0;  // covers the whole evolution window
    p.values = {1.0, -2.0, 0.7, 2.2};
    const double delta = 1.37;
    auto shifted = cfg;
    for (double& w : shifted.emitter_freqs) w += delta;
    Pulse sp = p;
    for (double& v : sp.values) v += delta;

    for (double t : {3.0, 9.5, 15.5}) {
        const auto a = evolve(cfg, p, symmetric_state(4), 0.0, t, 1e-10);
        const auto b = evolve(shifted, sp, symmetric_state(4), 0.0, t, 1e-10);
        const auto& ca = a.states.back();
        const auto& cb = b.states.back();
        for (int i = 0; i < 5; ++i) CHECK(std::abs(std::abs(ca[i]) - std::abs(cb[i])) < 1e-8);
    }
}

TEST_CASE("negating detunings conjugates the trajectory") {
    SplitMix64 rng(14);
    auto cfg = random_config(3, rng, 0.1);
    Pulse p;
    p.duration = 12.0;
    p.values = {0.8, -1.4, 2.0};
    auto neg = cfg;
    for (double& w : neg.emitter_freqs) w = -w;
    Pulse np = p;
    for (double& v : np.values) v = -v;

    const auto a = evolve(cfg, p, symmetric_state(3), 0.0, 7.0, 1e-10);
    const auto b = evolve(neg, np, symmetric_state(3), 0.0, 7.0, 1e-10);
    const auto& ca = a.states.back();
    const auto& cb = b.states.back();
    // c(-w, -theta) = S conj(c(w, theta)) with S flipping the cavity sign
    CHECK(std::abs(cb[0] + std::conj(ca[0])) < 1e-8);
    for (int i = 1; i < 4; ++i) CHECK(std::abs(cb[i] - std::conj(ca[i])) < 1e-8);
}

TEST_CASE("adaptive result matches a 10x finer fixed-step reference") {
    SplitMix64 rng(15);
    auto cfg = random_config(4, rng, 0.25);
    Pulse p;
    p.duration = 5.0;
    p.values = {1.5, -1.0, 0.3, 2.0, -0.7};
    const double tol = 1e-9;
    const auto traj = evolve(cfg, p, symmetric_state(4), 0.0, 10.0, tol);

    const int steps = static_cast<int>(traj.times.size()) * 10;
    auto make_rhs = [&](double wc) {
        return [&cfg, wc](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
            detail::apply_schrodinger(cfg, wc, false, y, dy);
        };
    };
    const auto ref = oracles::rk4_fixed(make_rhs, symmetric_state(4).amplitudes, 0.0, 10.0, steps, p);
    CHECK((traj.states.back() - ref).norm() < 10 * tol);
}

TEST_CASE("integration steps never straddle segment boundaries") {
    Pulse p;
    p.duration = 1.0;
    p.values = {5.0, -5.0};
    auto cfg = make_config(2, {0.1, -0.2}, Coupling::constant(0.5));
    const auto traj = evolve(cfg, p, symmetric_state(2), 0.0, 2.0, 1e-9);
    bool hit_boundary = false;
    for (double t : traj.times) hit_boundary = hit_boundary || t == 0.5 || t == 1.0;
    CHECK(hit_boundary);
    // strictly increasing sample times
    for (size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);
}

TEST_CASE("step-size underflow raises an integration failure with the time") {
    Eigen::VectorXcd y = Eigen::VectorXcd::Ones(1);
    auto rhs = [](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
        dv[0] = cd(0, 1e9) * v[0];
    };
    ode::StepControl ctl{1e-9, 0, 0};
    CHECK_THROWS_AS(ode::integrate(rhs, y, 1e9, 1e9 + 1.0, ctl), ode::IntegrationError);
    try {
        Eigen::VectorXcd y2 = Eigen::VectorXcd::Ones(1);
        ode::integrate(rhs, y2, 1e9, 1e9 + 1.0, ctl);
    } catch (const ode::IntegrationError& e) {
        CHECK(e.t_fail >= 1e9);
    }
}

TEST_CASE("propagator: zero pulse equals the matrix exponential") {
    SplitMix64 rng(16);
    auto cfg = random_config(3, rng);
    const double t_end = 4.0;
    const auto u = propagator(cfg, Pulse::zero(), t_end, Decay::Coherent, 1e-11);
    auto hcfg = cfg;
    hcfg.kappa = 1.0;  // coherent variant ignores decay, oracle needs the bare Hermitian part
    Eigen::MatrixXcd h = effective_hamiltonian(hcfg, Pulse::zero(), 0.0);
    h(0, 0) = 0.0;
    for (int i = 1; i <= 3; ++i) h(i, i) = cd(h(i, i).real(), 0.0);
    const Eigen::MatrixXcd ref = (cd(0, -1) * t_end * h).exp();
    CHECK((u - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("propagator: T -> 0 limit is the identity") {
    auto cfg = make_config(2, {0.4, -0.3}, Coupling::constant(0.6));
    const auto u = propagator(cfg, Pulse::zero(), 1e-9, Decay::Physical, 1e-12);
    CHECK((u - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("coherent propagator is unitary") {
    SplitMix64 rng(17);
    auto cfg = random_config(5, rng, 0.4);
    Pulse p;
    p.duration = 6.0;
    p.values = {2.0, -3.0, 1.0};
    const auto u = propagator(cfg, p, p.duration, Decay::Coherent, 1e-10);
    const Eigen::MatrixXcd uu = u.adjoint() * u;
    CHECK((uu - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("physical propagator is a contraction") {
    SplitMix64 rng(18);
    auto cfg = random_config(3, rng, 0.5);
    const auto u = propagator(cfg, Pulse::zero(), 8.0, Decay::Physical, 1e-10);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u);
    CHECK(svd.singularValues().maxCoeff() <= 1.0 + 1e-9);
}
