#include "dmtc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace dmtc {

namespace {

// Blockwise overlap of the emitter-sum vector with orthonormal eigenvector
// clusters: per cluster sum_j |sum_i q_ij|^2, which equals the squared norm of
// the symmetric vector projected onto the cluster subspace.
EsResult overlaps_from_clusters(const Eigen::MatrixXcd& q,
                                const std::vector<std::vector<int>>& clusters) {
    const auto d = q.cols();
    Eigen::VectorXcd v(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        cd s(0, 0);
        for (Eigen::Index i = 1; i < q.rows(); ++i) s += q(i, j);
        v[j] = s;
    }

    EsResult res;
    res.spectrum = Eigen::VectorXd::Zero(d);
    double best = -1.0;
    const std::vector<int>* best_cluster = nullptr;
    for (const auto& c : clusters) {
        double val = 0;
        for (int j : c) val += std::norm(v[j]);
        for (int j : c) res.spectrum[j] = val;
        if (val > best) {
            best = val;
            best_cluster = &c;
        }
    }
    res.value = best;
    if (best_cluster && best > 0) {
        Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(q.rows());
        for (int j : *best_cluster) phi += std::conj(v[j]) * q.col(j);
        res.argmax_state = phi / phi.norm();
    } else if (best_cluster) {
        res.argmax_state = q.col(best_cluster->front());
    }
    return res;
}

std::vector<std::vector<int>> cluster_consecutive(const std::vector<int>& order,
                                                  const std::function<double(int, int)>& dist,
                                                  double tol) {
    std::vector<std::vector<int>> clusters;
    for (int idx : order) {
        if (!clusters.empty() && dist(clusters.back().back(), idx) <= tol) {
            clusters.back().push_back(idx);
        } else {
            clusters.push_back({idx});
        }
    }
    return clusters;
}

}  // namespace

EsResult eigenstate_superradiance_static(const SystemConfig& config) {
    config.validate();
    const int n = config.n_emitters;
    const double g = config.g();

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 1; i <= n; ++i) {
        h(i, i) = config.emitter_freqs[static_cast<size_t>(i - 1)];
        h(0, i) = g;
        h(i, 0) = g;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eigenstate_superradiance_static: eigensolver failed");
    }
    const Eigen::VectorXd& lam = solver.eigenvalues();  // ascending
    const double scale = std::max(1.0, std::max(std::abs(lam[0]), std::abs(lam[n])));
    const double tol = 1e-8 * scale;

    std::vector<int> order(static_cast<size_t>(n + 1));
    std::iota(order.begin(), order.end(), 0);
    auto clusters = cluster_consecutive(
        order, [&](int a, int b) { return std::abs(lam[b] - lam[a]); }, tol);

    return overlaps_from_clusters(solver.eigenvectors().cast<cd>(), clusters);
}

EsResult eigenstate_superradiance_modulated(const SystemConfig& config, const Pulse& pulse,
                                            double tol) {
    if (!(pulse.duration > 0)) {
        throw std::invalid_argument("eigenstate_superradiance_modulated: pulse duration must be > 0");
    }
    const Eigen::MatrixXcd u = propagator(config, pulse, pulse.duration, Decay::Coherent, tol);

    // The coherent propagator is unitary (normal), so its Schur vectors form an
    // orthonormal eigenbasis and the Schur form is diagonal to rounding.
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u, true);
    if (schur.info() != Eigen::Success) {
        throw std::runtime_error("eigenstate_superradiance_modulated: Schur decomposition failed");
    }
    const Eigen::MatrixXcd& q = schur.matrixU();
    const auto d = u.cols();
    std::vector<cd> z(static_cast<size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) z[static_cast<size_t>(j)] = schur.matrixT()(j, j);

    // Cluster eigenvalues on the unit circle; wrap around at +-pi.
    std::vector<int> order(static_cast<size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::arg(z[static_cast<size_t>(a)]) < std::arg(z[static_cast<size_t>(b)]);
    });
    const double ztol = 1e-8;
    auto clusters = cluster_consecutive(
        order,
        [&](int a, int b) { return std::abs(z[static_cast<size_t>(b)] - z[static_cast<size_t>(a)]); },
        ztol);
    if (clusters.size() > 1) {
        const int first = clusters.front().front();
        const int last = clusters.back().back();
        if (std::abs(z[static_cast<size_t>(first)] - z[static_cast<size_t>(last)]) <= ztol) {
            for (int j : clusters.front()) clusters.back().push_back(j);
            clusters.erase(clusters.begin());
        }
    }
    return overlaps_from_clusters(q, clusters);
}

std::vector<double> horizon_grid(const Pulse& pulse, const HorizonPolicy& policy, double kappa) {
    if (!(policy.max_time > 0)) throw std::invalid_argument("HorizonPolicy: max_time must be > 0");
    const double hi = policy.max_time;
    std::vector<double> grid = pulse_breakpoints(pulse, 0.0, hi);
    const double chunk = std::min(2.0 / kappa, hi / 8.0);
    double t = (pulse.duration < hi) ? pulse.duration : hi;
    for (t += chunk; t < hi; t += chunk) grid.push_back(t);
    grid.push_back(hi);
    return grid;
}

FidelityResult photon_fidelity(const SystemConfig& config, const Pulse& pulse,
                               const HorizonPolicy& policy) {
    config.validate();
    pulse.validate();

    const int n = config.n_emitters;
    const SinglePhotonState init = symmetric_state(n);

    // Augmented state: [c_0..c_N, F, L] with dF = kappa|c_0|^2, dL = gamma*sum|c_i|^2,
    // so both integrals carry the stepper's quadrature order.
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n + 3);
    y.head(n + 1) = init.amplitudes;

    FidelityResult res;
    ode::StepControl ctl{policy.tol, 0, 0};
    const auto grid = horizon_grid(pulse, policy, config.kappa);

    double prev = 0.0;
    bool first_piece = true;
    double t_end = 0.0;
    bool hit_max = true;
    for (double t_stop : grid) {
        integrate_piecewise(
            pulse, y, prev, t_stop, ctl,
            [&](double wc) {
                return [&config, wc, n](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                    detail::apply_schrodinger(config, wc, false, v, dv);
                    dv[n + 1] = config.kappa * std::norm(v[0]);
                    dv[n + 2] = config.gamma * v.segment(1, n).squaredNorm();
                };
            },
            [&](double t, const Eigen::VectorXcd& v) {
                if (!first_piece && t == prev) return;  // piece-start duplicate
                res.times.push_back(t);
                res.emitted_flux.push_back(config.kappa * std::norm(v[0]));
            });
        first_piece = false;
        prev = t_stop;
        t_end = t_stop;
        if (y.head(n + 1).squaredNorm() < policy.residual_cutoff) {
            hit_max = false;
            break;
        }
    }

    res.value = y[n + 1].real();
    res.emitter_loss = y[n + 2].real();
    res.residual = y.head(n + 1).squaredNorm();
    res.horizon = t_end;
    res.truncated = hit_max && res.residual > 100.0 * policy.residual_cutoff;
    return res;
}

}  // namespace dmtc
