#include "dmtc/pulse_opt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "dmtc/rng.hpp"

namespace dmtc {

namespace {

// Backward joint system y = [c, lambda, acc]: the state is re-integrated in
// reverse inside one checkpoint interval, the costate obeys
// dlambda/dt = -i H^dag lambda - kappa c_a e_a, and acc integrates
// Im(conj(lambda_a) c_a).
void apply_adjoint(const SystemConfig& cfg, double omega_c, const Eigen::VectorXcd& y,
                   Eigen::VectorXcd& dy) {
    const int n = cfg.n_emitters;
    const int d = n + 1;
    const double g = cfg.g();
    const double hk = 0.5 * cfg.kappa;
    const double hg = 0.5 * cfg.gamma;
    const cd mi(0.0, -1.0);

    detail::apply_schrodinger(cfg, omega_c, false, y, dy);

    // H is complex-symmetric, so H^dag = conj(H).
    cd lsum(0.0, 0.0);
    for (int i = 1; i <= n; ++i) lsum += y[d + i];
    dy[d] = mi * (cd(omega_c, hk) * y[d] + g * lsum) - cfg.kappa * y[0];
    const cd gl0 = g * y[d];
    for (int i = 1; i <= n; ++i) {
        dy[d + i] = mi * (cd(cfg.emitter_freqs[static_cast<size_t>(i - 1)], hg) * y[d + i] + gl0);
    }
    dy[2 * d] = std::imag(std::conj(y[d]) * y[0]);
}

double roughness(const std::vector<double>& th) {
    double s = 0;
    for (size_t k = 0; k + 1 < th.size(); ++k) {
        const double d = th[k + 1] - th[k];
        s += d * d;
    }
    return s;
}

Eigen::VectorXd roughness_gradient(const std::vector<double>& th) {
    const auto m = static_cast<Eigen::Index>(th.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        if (k > 0) g[k] += 2.0 * (th[static_cast<size_t>(k)] - th[static_cast<size_t>(k - 1)]);
        if (k + 1 < m) g[k] -= 2.0 * (th[static_cast<size_t>(k + 1)] - th[static_cast<size_t>(k)]);
    }
    return g;
}

std::vector<double> clamped(const std::vector<double>& th, double lo, double hi) {
    std::vector<double> out = th;
    for (double& v : out) v = std::min(hi, std::max(lo, v));
    return out;
}

// Ascent gradient with components pointing out of an active bound zeroed.
Eigen::VectorXd free_gradient(const Eigen::VectorXd& g, const std::vector<double>& th,
                              double lo, double hi) {
    Eigen::VectorXd f = g;
    const double eps = 1e-12 * std::max(1.0, hi - lo);
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        const double v = th[static_cast<size_t>(k)];
        if ((v <= lo + eps && f[k] < 0) || (v >= hi - eps && f[k] > 0)) f[k] = 0;
    }
    return f;
}

struct SingleRun {
    std::vector<double> theta;
    std::vector<double> history;  // penalized objective, monotone
    double objective_raw = 0;
    double objective_pen = 0;
    double grad_norm = 0;
    int iterations = 0;
    bool stalled = false;
};

constexpr int kMaxRejects = 40;

SingleRun run_first_order(const PulseObjective& obj, const Pulse& shape,
                          std::vector<double> theta, const OptimizationOptions& opts) {
    SingleRun run;
    const auto m = static_cast<Eigen::Index>(theta.size());
    auto make_pulse = [&](const std::vector<double>& th) {
        Pulse p = shape;
        p.values = th;
        return p;
    };
    auto penalized = [&](double raw, const std::vector<double>& th) {
        return raw - opts.smoothness_weight * roughness(th);
    };

    double j_raw = obj.value(make_pulse(theta));
    double j_pen = penalized(j_raw, theta);
    run.history.push_back(j_pen);

    Eigen::VectorXd mom = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd sec = Eigen::VectorXd::Zero(m);
    const double beta1 = 0.9, beta2 = 0.999;
    double lr = opts.initial_step;
    const double lr_cap = 100.0 * opts.initial_step;
    int accepted = 0;

    Eigen::VectorXd gfree = Eigen::VectorXd::Zero(m);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Eigen::VectorXd g = obj.gradient(make_pulse(theta), nullptr);
        g -= opts.smoothness_weight * roughness_gradient(theta);
        gfree = free_gradient(g, theta, opts.theta_min, opts.theta_max);
        run.grad_norm = gfree.norm();
        if (run.grad_norm < opts.gradient_tolerance) break;

        ++accepted;
        mom = beta1 * mom + (1.0 - beta1) * g;
        sec = beta2 * sec + (1.0 - beta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(beta1, accepted);
        const double bc2 = 1.0 - std::pow(beta2, accepted);
        Eigen::VectorXd dir(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            dir[k] = (mom[k] / bc1) / (std::sqrt(sec[k] / bc2) + 1e-12);
        }

        bool ok = false;
        for (int attempt = 0; attempt < kMaxRejects; ++attempt) {
            std::vector<double> cand = theta;
            for (Eigen::Index k = 0; k < m; ++k) cand[static_cast<size_t>(k)] += lr * dir[k];
            cand = clamped(cand, opts.theta_min, opts.theta_max);
            if (cand == theta) {
                lr *= 0.5;
                continue;
            }
            const double c_raw = obj.value(make_pulse(cand));
            const double c_pen = penalized(c_raw, cand);
            if (c_pen >= j_pen) {
                theta = std::move(cand);
                j_raw = c_raw;
                j_pen = c_pen;
                run.history.push_back(j_pen);
                lr = std::min(lr * 1.25, lr_cap);
                ok = true;
                break;
            }
            lr *= 0.5;
        }
        run.iterations = iter + 1;
        if (!ok) {
            run.stalled = true;
            break;
        }
    }

    run.theta = std::move(theta);
    run.objective_raw = j_raw;
    run.objective_pen = j_pen;
    return run;
}

SingleRun run_lbfgs(const PulseObjective& obj, const Pulse& shape, std::vector<double> theta,
                    const OptimizationOptions& opts) {
    SingleRun run;
    const auto m = static_cast<Eigen::Index>(theta.size());
    auto make_pulse = [&](const std::vector<double>& th) {
        Pulse p = shape;
        p.values = th;
        return p;
    };
    auto penalized = [&](double raw, const std::vector<double>& th) {
        return raw - opts.smoothness_weight * roughness(th);
    };
    auto ascent_grad = [&](const std::vector<double>& th) {
        Eigen::VectorXd g = obj.gradient(make_pulse(th), nullptr);
        g -= opts.smoothness_weight * roughness_gradient(th);
        return g;
    };

    double j_raw = obj.value(make_pulse(theta));
    double j_pen = penalized(j_raw, theta);
    run.history.push_back(j_pen);
    Eigen::VectorXd g = ascent_grad(theta);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    const size_t mem = 10;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Eigen::VectorXd gfree = free_gradient(g, theta, opts.theta_min, opts.theta_max);
        run.grad_norm = gfree.norm();
        if (run.grad_norm < opts.gradient_tolerance) break;

        // Two-loop recursion on the descent problem f = -J_pen.
        Eigen::VectorXd q = -g;
        std::vector<double> alpha(s_hist.size());
        for (size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma_sc = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma_sc;
        } else {
            q *= opts.initial_step / std::max(1e-12, g.norm());
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;  // ascent direction for J_pen
        if (dir.dot(g) <= 0) dir = g * (opts.initial_step / std::max(1e-12, g.norm()));

        bool ok = false;
        double step = 1.0;
        for (int attempt = 0; attempt < kMaxRejects; ++attempt) {
            std::vector<double> cand = theta;
            for (Eigen::Index k = 0; k < m; ++k) cand[static_cast<size_t>(k)] += step * dir[k];
            cand = clamped(cand, opts.theta_min, opts.theta_max);
            if (cand == theta) {
                step *= 0.5;
                continue;
            }
            Eigen::VectorXd disp(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                disp[k] = cand[static_cast<size_t>(k)] - theta[static_cast<size_t>(k)];
            }
            const double c_raw = obj.value(make_pulse(cand));
            const double c_pen = penalized(c_raw, cand);
            if (c_pen >= j_pen + 1e-4 * g.dot(disp) && c_pen >= j_pen) {
                Eigen::VectorXd g_new = ascent_grad(cand);
                Eigen::VectorXd yv = g - g_new;  // = grad f_new - grad f for f = -J
                const double sy = disp.dot(yv);
                if (sy > 1e-12 * disp.norm() * yv.norm()) {
                    s_hist.push_back(disp);
                    y_hist.push_back(yv);
                    rho_hist.push_back(1.0 / sy);
                    if (s_hist.size() > mem) {
                        s_hist.pop_front();
                        y_hist.pop_front();
                        rho_hist.pop_front();
                    }
                }
                theta = std::move(cand);
                j_raw = c_raw;
                j_pen = c_pen;
                g = std::move(g_new);
                run.history.push_back(j_pen);
                ok = true;
                break;
            }
            step *= 0.5;
        }
        run.iterations = iter + 1;
        if (!ok) {
            run.stalled = true;
            break;
        }
    }

    run.theta = std::move(theta);
    run.objective_raw = j_raw;
    run.objective_pen = j_pen;
    return run;
}

}  // namespace

void OptimizationOptions::validate() const {
    if (max_iters < 0) throw std::invalid_argument("OptimizationOptions: max_iters must be >= 0");
    if (!(theta_min < theta_max)) throw std::invalid_argument("OptimizationOptions: theta_min must be < theta_max");
    if (smoothness_weight < 0) throw std::invalid_argument("OptimizationOptions: smoothness weight must be >= 0");
    if (!(initial_step > 0)) throw std::invalid_argument("OptimizationOptions: initial_step must be > 0");
    if (restarts < 0) throw std::invalid_argument("OptimizationOptions: restarts must be >= 0");
}

Eigen::VectorXd fidelity_gradient(const SystemConfig& config, const Pulse& pulse,
                                  const HorizonPolicy& policy, double* value_out) {
    config.validate();
    pulse.validate();

    const int n = config.n_emitters;
    const int d = n + 1;
    const int m = pulse.segments();
    ode::StepControl ctl{policy.tol, 0, 0};

    // Forward pass: same stop grid as photon_fidelity, with checkpoints of the
    // state stored at most 0.5/kappa apart so the backward re-integration of c
    // never amplifies over a long decayed stretch.
    const double max_ck = 0.5 / config.kappa;
    std::vector<double> ck_t;
    std::vector<Eigen::VectorXcd> ck_c;

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(d + 2);  // [c, F, L]
    y.head(d) = symmetric_state(n).amplitudes;
    ck_t.push_back(0.0);
    ck_c.push_back(y.head(d));

    auto make_rhs = [&](double wc) {
        return [&config, wc, n](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
            detail::apply_schrodinger(config, wc, false, v, dv);
            dv[n + 1] = config.kappa * std::norm(v[0]);
            dv[n + 2] = config.gamma * v.segment(1, n).squaredNorm();
        };
    };

    double prev = 0.0;
    for (double t_stop : horizon_grid(pulse, policy, config.kappa)) {
        const int pieces = std::max(1, static_cast<int>(std::ceil((t_stop - prev) / max_ck)));
        for (int p = 0; p < pieces; ++p) {
            const double a = prev + (t_stop - prev) * p / pieces;
            const double b = prev + (t_stop - prev) * (p + 1) / pieces;
            integrate_piecewise(pulse, y, a, b, ctl, make_rhs,
                                [](double, const Eigen::VectorXcd&) {});
            ck_t.push_back(b);
            ck_c.push_back(y.head(d));
        }
        prev = t_stop;
        if (y.head(d).squaredNorm() < policy.residual_cutoff) break;
    }
    if (value_out) *value_out = y[d].real();

    // Backward pass over checkpoint intervals.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
    Eigen::VectorXcd yb = Eigen::VectorXcd::Zero(2 * d + 1);
    const double seg_len = pulse.segment_length();

    for (size_t k = ck_t.size() - 1; k >= 1; --k) {
        const double t_b = ck_t[k];
        const double t_a = ck_t[k - 1];
        yb.head(d) = ck_c[k];
        yb[2 * d] = 0.0;
        integrate_piecewise(
            pulse, yb, t_b, t_a, ctl,
            [&](double wc) {
                return [&config, wc](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                    apply_adjoint(config, wc, v, dv);
                };
            },
            [](double, const Eigen::VectorXcd&) {});
        const double tm = 0.5 * (t_a + t_b);
        if (tm < pulse.duration) {
            const int seg = std::min(static_cast<int>(tm / seg_len), m - 1);
            grad[seg] += -2.0 * yb[2 * d].real();
        }
        if (!grad.allFinite()) {
            throw std::runtime_error("fidelity_gradient: non-finite gradient");
        }
    }
    return grad;
}

PulseObjective make_fidelity_objective(const SystemConfig& config, const HorizonPolicy& policy) {
    PulseObjective obj;
    obj.value = [config, policy](const Pulse& p) { return photon_fidelity(config, p, policy).value; };
    obj.gradient = [config, policy](const Pulse& p, double* v) {
        return fidelity_gradient(config, p, policy, v);
    };
    return obj;
}

OptimizationRecord optimize_pulse(const PulseObjective& objective, const Pulse& initial,
                                  const OptimizationOptions& opts) {
    opts.validate();
    initial.validate();

    Pulse shape = initial;
    std::vector<double> theta0 = clamped(initial.values, opts.theta_min, opts.theta_max);

    auto dispatch = [&](std::vector<double> th) {
        return (opts.method == OptimizationOptions::Method::Lbfgs)
                   ? run_lbfgs(objective, shape, std::move(th), opts)
                   : run_first_order(objective, shape, std::move(th), opts);
    };

    SingleRun best = dispatch(theta0);
    SplitMix64 rng(stream_seed(opts.restart_seed, 0x7265737461727473ULL));
    for (int r = 0; r < opts.restarts; ++r) {
        std::vector<double> th = theta0;
        for (double& v : th) v += opts.restart_scale * rng.uniform(-1.0, 1.0);
        SingleRun cand = dispatch(clamped(th, opts.theta_min, opts.theta_max));
        if (cand.objective_pen > best.objective_pen) best = std::move(cand);
    }

    OptimizationRecord rec;
    rec.initial = initial;
    rec.optimized = shape;
    rec.optimized.values = best.theta;
    rec.objective_history = best.history;
    rec.final_gradient_norm = best.grad_norm;
    rec.objective_final = best.objective_raw;
    rec.iterations = best.iterations;
    rec.stalled = best.stalled;

    rec.objective_zero_pulse = objective.value(Pulse::zero_like(initial));

    // The zero pulse is a feasible candidate whenever it lies within bounds;
    // never report an "optimized" pulse that it beats.
    if (opts.theta_min <= 0.0 && 0.0 <= opts.theta_max &&
        rec.objective_zero_pulse > best.objective_pen) {
        rec.optimized = Pulse::zero_like(initial);
        rec.objective_final = rec.objective_zero_pulse;
        rec.objective_history = {rec.objective_zero_pulse};
        rec.stalled = false;
    }

    rec.improvement_ratio =
        (rec.objective_zero_pulse > 0) ? rec.objective_final / rec.objective_zero_pulse : 1.0;
    return rec;
}

OptimizationRecord optimize_pulse(const SystemConfig& config, const Pulse& initial,
                                  const OptimizationOptions& opts) {
    return optimize_pulse(make_fidelity_objective(config, opts.horizon), initial, opts);
}

}  // namespace dmtc
