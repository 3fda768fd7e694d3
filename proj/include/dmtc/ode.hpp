// ode.hpp — Adaptive embedded Runge-Kutta integration for complex state vectors.
//
// Dormand-Prince 5(4) with FSAL, mixed absolute/relative error control and
// support for decreasing time spans (t1 < t0). Callers are responsible for
// splitting the integration range at discontinuities of the right-hand side;
// within one call the RHS is assumed smooth.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dmtc::ode {

struct IntegrationError : std::runtime_error {
    double t_fail;
    IntegrationError(double t, const std::string& msg)
        : std::runtime_error(msg + " (t = " + std::to_string(t) + ")"), t_fail(t) {}
};

struct StepControl {
    double tol = 1e-9;        // local error tolerance, used as both atol and rtol
    double initial_step = 0;  // 0 = choose automatically
    double max_step = 0;      // 0 = unbounded
};

namespace detail {

// Weighted RMS error norm: err_i scaled by atol + rtol*max(|y_i|,|y_new_i|).
inline double error_norm(const Eigen::VectorXcd& err,
                         const Eigen::VectorXcd& y0,
                         const Eigen::VectorXcd& y1,
                         double tol) {
    const auto n = err.size();
    double acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = tol + tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double e = std::abs(err[i]) / sc;
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace detail

// Integrates dy/dt = rhs(t, y) from t0 to t1 in place. The observer is called
// as obs(t, y) at t0 and after every accepted step. Throws IntegrationError on
// step-size underflow.
template <class Rhs, class Observer>
void integrate(Rhs&& rhs, Eigen::VectorXcd& y, double t0, double t1,
               const StepControl& ctl, Observer&& obs) {
    if (t0 == t1) {
        obs(t0, y);
        return;
    }
    if (!(ctl.tol > 0)) throw std::invalid_argument("ode::integrate: tol must be > 0");

    // Dormand-Prince 5(4) tableau.
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b (5th order) minus b* (embedded 4th order).
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const Eigen::Index n = y.size();

    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    Eigen::VectorXcd ytmp(n), ynew(n), yerr(n);

    double t = t0;
    obs(t0, y);
    rhs(t, y, k1);

    // Initial step: crude version of Hairer's heuristic.
    double h;
    if (ctl.initial_step > 0) {
        h = std::min(ctl.initial_step, span);
    } else {
        double d0 = 0, d1 = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = ctl.tol * (1.0 + std::abs(y[i]));
            d0 += std::norm(y[i] / sc);
            d1 += std::norm(k1[i] / sc);
        }
        d0 = std::sqrt(d0);
        d1 = std::sqrt(d1);
        h = (d1 > 1e-10 * d0 && d1 > 0) ? 0.01 * d0 / d1 : 1e-3 * span;
        h = std::min(std::max(h, 1e-8 * span), span);
    }
    if (ctl.max_step > 0) h = std::min(h, ctl.max_step);
    h *= dir;

    const double h_floor = 16.0 * std::numeric_limits<double>::epsilon();

    while (dir * (t1 - t) > 0) {
        if (dir * (t + h) > dir * t1) h = t1 - t;
        if (std::abs(h) < h_floor * std::max(std::abs(t), 1.0)) {
            throw IntegrationError(t, "ode::integrate: step size underflow");
        }

        ytmp = y + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, ynew, k7);
        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double err = detail::error_norm(yerr, y, ynew, ctl.tol);
        if (err <= 1.0) {
            t += h;
            y.swap(ynew);
            k1.swap(k7);  // FSAL: k7 = rhs at the accepted point
            obs(t, y);
        }
        // on rejection k1 still holds rhs(t, y) and is reused as-is

        double fac = (err > 0) ? 0.9 * std::pow(err, -0.2) : 5.0;
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        if (ctl.max_step > 0 && std::abs(h) > ctl.max_step) h = dir * ctl.max_step;
    }
}

// Overload without an observer.
template <class Rhs>
void integrate(Rhs&& rhs, Eigen::VectorXcd& y, double t0, double t1,
               const StepControl& ctl) {
    integrate(std::forward<Rhs>(rhs), y, t0, t1, ctl,
              [](double, const Eigen::VectorXcd&) {});
}

}  // namespace dmtc::ode
