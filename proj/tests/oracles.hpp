// oracles.hpp — Independent reference computations used only by tests. These
// deliberately avoid the adaptive integrator and the adjoint machinery they
// are checking.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "dmtc/core.hpp"

namespace oracles {

using dmtc::cd;

// exp(-i H t) c0 for a constant Hamiltonian via a dense matrix exponential.
inline Eigen::VectorXcd expm_evolve(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& c0,
                                    double t) {
    const Eigen::MatrixXcd m = (cd(0, -1) * t * h).exp();
    return m * c0;
}

// int_0^T (c(t)^dag P c(t)) dt for c(t) = exp(-i H t) c0 with constant,
// diagonalizable H, via the eigendecomposition closed form.
inline double quadratic_integral(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& c0,
                                 const Eigen::MatrixXcd& p, double t_end) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h);
    const Eigen::MatrixXcd& v = es.eigenvectors();
    const Eigen::VectorXcd w = v.partialPivLu().solve(c0);
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Eigen::MatrixXcd pv = v.adjoint() * p * v;

    cd acc(0, 0);
    const auto d = lam.size();
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index l = 0; l < d; ++l) {
            const cd mu = cd(0, -1) * (lam[k] - std::conj(lam[l]));
            const cd coef = std::conj(w[l]) * pv(l, k) * w[k];
            if (std::abs(mu) < 1e-14) {
                acc += coef * t_end;
            } else {
                acc += coef * (std::exp(mu * t_end) - 1.0) / mu;
            }
        }
    }
    return acc.real();
}

// Fidelity of a constant-coefficient (zero-pulse) system up to t_end.
inline double fidelity_oracle(const dmtc::SystemConfig& cfg, double t_end) {
    const Eigen::MatrixXcd h =
        dmtc::effective_hamiltonian(cfg, dmtc::Pulse::zero(1.0, 1), 0.5);
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(cfg.dim(), cfg.dim());
    p(0, 0) = cfg.kappa;
    return quadratic_integral(h, dmtc::symmetric_state(cfg.n_emitters).amplitudes, p, t_end);
}

// Classic fixed-step RK4 with pulse-segment alignment. make_rhs(omega_c) must
// return the RHS of one constant-omega_c piece, mirroring integrate_piecewise
// (sampling omega_c at raw stage times would leak the next segment's value
// into the final stage of each piece).
template <class MakeRhs>
inline Eigen::VectorXcd rk4_fixed(MakeRhs&& make_rhs, Eigen::VectorXcd y, double t0, double t1,
                                  int steps, const dmtc::Pulse& pulse) {
    auto cuts = dmtc::pulse_breakpoints(pulse, t0, t1);
    cuts.push_back(t1);
    const double h_target = (t1 - t0) / steps;
    Eigen::VectorXcd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
    double a = t0;
    for (double b : cuts) {
        auto rhs = make_rhs(pulse.omega_c(0.5 * (a + b)));
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h_target)));
        const double h = (b - a) / n;
        for (int s = 0; s < n; ++s) {
            const double t = a + s * h;
            rhs(t, y, k1);
            tmp = y + 0.5 * h * k1;
            rhs(t + 0.5 * h, tmp, k2);
            tmp = y + 0.5 * h * k2;
            rhs(t + 0.5 * h, tmp, k3);
            tmp = y + h * k3;
            rhs(t + h, tmp, k4);
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        a = b;
    }
    return y;
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate_simpson(const std::function<double(double)>& f, double a, double b,
                                double tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Frequency-domain (Laplace/Plancherel) value of kappa * int_0^inf |alpha|^2 dt
// for the unmodulated effective model: alpha has transform
// A(i nu) = -iG / ((i nu + kappa/2)(i nu + delta0) + G^2).
inline double laplace_fidelity_oracle(double G, double delta0, double kappa) {
    if (G == 0) return 0.0;
    auto dens = [&](double nu) {
        const double re = G * G + 0.5 * kappa * delta0 - nu * nu;
        const double im = nu * (0.5 * kappa + delta0);
        return G * G / (re * re + im * im);
    };
    const double w = std::cbrt(2.0 * G * G / (3.0 * 1e-13));
    const double core = integrate_simpson(dens, -w, w, 1e-13);
    const double tail = 2.0 * G * G / (3.0 * w * w * w);
    return kappa * (core + tail) / (2.0 * std::numbers::pi);
}

// Central finite differences of a scalar pulse functional.
inline Eigen::VectorXd fd_gradient(const std::function<double(const dmtc::Pulse&)>& f,
                                   const dmtc::Pulse& pulse, double h) {
    Eigen::VectorXd g(pulse.segments());
    for (int k = 0; k < pulse.segments(); ++k) {
        dmtc::Pulse up = pulse, dn = pulse;
        up.values[static_cast<size_t>(k)] += h;
        dn.values[static_cast<size_t>(k)] -= h;
        g[k] = (f(up) - f(dn)) / (2.0 * h);
    }
    return g;
}

// Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0;
    for (size_t i = 0; i < draws.size(); ++i) {
        const double c = cdf(draws[i]);
        d = std::max(d, std::abs(c - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
    }
    return d;
}

}  // namespace oracles
