#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmtc/dicke.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/multiphoton.hpp"
#include "dmtc/rng.hpp"

using namespace dmtc;

namespace {

SystemConfig config_of(int n, std::vector<double> freqs, double g, double gamma) {
    SystemConfig cfg;
    cfg.n_emitters = n;
    cfg.emitter_freqs = std::move(freqs);
    cfg.coupling = Coupling::constant(g);
    cfg.gamma = gamma;
    return cfg;
}

Pulse test_pulse() {
    Pulse p;
    p.duration = 4.0;
    p.values = {0.8, -1.2, 0.4, 1.5};
    return p;
}

HorizonPolicy mp_policy(double max_time = 80.0, double tol = 1e-9) {
    HorizonPolicy policy;
    policy.max_time = max_time;
    policy.tol = tol;
    return policy;
}

}  // namespace

TEST_CASE("dicke multiplicities decompose the full spin space") {
    for (int n = 1; n <= 12; ++n) {
        std::uint64_t total = 0;
        for (int tj : dicke::allowed_twice_j(n)) {
            total += dicke::multiplicity(n, tj) * static_cast<std::uint64_t>(tj + 1);
        }
        CHECK(total == (1ULL << n));
    }
    CHECK(dicke::multiplicity(4, 0) == 2);
    CHECK(dicke::multiplicity(4, 2) == 3);
    CHECK(dicke::multiplicity(4, 4) == 1);
    CHECK(dicke::multiplicity(4, 1) == 0);  // wrong parity
}

TEST_CASE("local decay channels conserve weighted probability") {
    // sum over channels of d_target * amp(e)^2 must equal d_source * e
    for (int n = 1; n <= 10; ++n) {
        for (int tj : dicke::allowed_twice_j(n)) {
            const double d_src = static_cast<double>(dicke::multiplicity(n, tj));
            const auto channels = dicke::local_decay_channels(n, tj);
            const int e_lo = (n - tj) / 2, e_hi = (n + tj) / 2;
            for (int e = e_lo; e <= e_hi; ++e) {
                double sum = 0;
                for (const auto& ch : channels) {
                    const double a = ch.amp[static_cast<size_t>(e)];
                    sum += static_cast<double>(dicke::multiplicity(n, ch.twice_j_to)) * a * a;
                }
                CAPTURE(n);
                CAPTURE(tj);
                CAPTURE(e);
                CHECK(sum == doctest::Approx(d_src * e).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("exact solver at N=1 reproduces the single-photon fidelity") {
    const auto cfg = config_of(1, {0.4}, 0.7, 0.2);
    const auto policy = mp_policy(120.0, 1e-10);
    const auto full = exact_full_fidelity(cfg, test_pulse(), {3, true, 1e-6}, policy);
    const auto single = photon_fidelity(cfg, test_pulse(), policy);
    CHECK(std::abs(full.value - single.value) < 1e-7);
}

TEST_CASE("no coupling emits nothing") {
    const auto cfg = config_of(3, {0.5, -0.5, 0.2}, 0.0, 0.0);
    CHECK(exact_full_fidelity(cfg, Pulse::zero(), {5, true, 1e-6}, mp_policy(10.0)).value ==
          doctest::Approx(0.0).epsilon(1e-12));
    BinnedEnsemble ens;
    ens.bins = {{0.5, 2}, {-0.5, 2}};
    CHECK(binned_fidelity(ens, Coupling::constant(0.0), 1.0, 0.0, Pulse::zero(), {6, true, 1e-6},
                          mp_policy(10.0))
              .value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("homogeneous resonant emitters emit every excitation eventually") {
    const auto cfg = config_of(4, {0.0, 0.0, 0.0, 0.0}, 0.5, 0.0);
    HorizonPolicy policy = mp_policy(400.0, 1e-9);
    policy.residual_cutoff = 1e-9;
    const auto res = exact_full_fidelity(cfg, Pulse::zero(), {6, true, 1e-6}, policy);
    CHECK(res.value == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(!res.leak_flagged);
}

TEST_CASE("binned solver matches the exact solver") {
    const double w0 = 2.0;
    SUBCASE("N=4, two bins, no local decay") {
        const auto cfg = config_of(4, {w0, w0, -w0, -w0}, 0.5, 0.0);
        BinnedEnsemble ens;
        ens.bins = {{w0, 2}, {-w0, 2}};
        for (const Pulse& p : {Pulse::zero(4.0, 4), test_pulse()}) {
            const auto ex = exact_full_fidelity(cfg, p, {6, true, 1e-6}, mp_policy());
            const auto bn = binned_fidelity(ens, cfg.coupling, 1.0, 0.0, p, {6, true, 1e-6}, mp_policy());
            CHECK(std::abs(ex.value - bn.value) < 1e-6);
        }
    }
    SUBCASE("N=4, two bins, with local decay") {
        const auto cfg = config_of(4, {w0, w0, -w0, -w0}, 0.5, 0.5);
        BinnedEnsemble ens;
        ens.bins = {{w0, 2}, {-w0, 2}};
        for (const Pulse& p : {Pulse::zero(4.0, 4), test_pulse()}) {
            const auto ex = exact_full_fidelity(cfg, p, {6, true, 1e-6}, mp_policy());
            const auto bn = binned_fidelity(ens, cfg.coupling, 1.0, 0.5, p, {6, true, 1e-6}, mp_policy());
            CHECK(std::abs(ex.value - bn.value) < 1e-6);
        }
    }
    SUBCASE("N=5, uneven bins, local decay") {
        const auto cfg = config_of(5, {1.3, 1.3, -0.9, -0.9, -0.9}, 0.45, 0.3);
        BinnedEnsemble ens;
        ens.bins = {{1.3, 2}, {-0.9, 3}};
        const auto ex = exact_full_fidelity(cfg, test_pulse(), {7, true, 1e-6}, mp_policy());
        const auto bn =
            binned_fidelity(ens, cfg.coupling, 1.0, 0.3, test_pulse(), {7, true, 1e-6}, mp_policy());
        CHECK(std::abs(ex.value - bn.value) < 1e-6);
    }
}

TEST_CASE("bins sharing a frequency merge into one collective ladder") {
    BinnedEnsemble split;
    split.bins = {{0.7, 2}, {0.7, 2}};
    BinnedEnsemble merged;
    merged.bins = {{0.7, 4}};
    for (double gamma : {0.0, 0.4}) {
        const auto a = binned_fidelity(split, Coupling::constant(0.5), 1.0, gamma, test_pulse(),
                                       {6, true, 1e-6}, mp_policy());
        const auto b = binned_fidelity(merged, Coupling::constant(0.5), 1.0, gamma, test_pulse(),
                                       {6, true, 1e-6}, mp_policy());
        CHECK(std::abs(a.value - b.value) < 1e-7);
    }
}

TEST_CASE("one-excitation restriction of the Lindblad generator is the effective Hamiltonian") {
    SplitMix64 rng(61);
    const auto cfg = config_of(3, {1.1, -0.4, 0.6}, 0.8, 0.35);
    const int n_max = 3;
    const int dspin = 1 << 3;
    const int dim = (n_max + 1) * dspin;

    // random pure state in the one-excitation sector
    const int idx_cavity = 1 * dspin + 0;
    const std::vector<int> sector = {idx_cavity, 0 * dspin + 0b001, 0 * dspin + 0b010, 0 * dspin + 0b100};
    Eigen::VectorXcd psi_full = Eigen::VectorXcd::Zero(dim);
    Eigen::VectorXcd psi_small(4);
    for (int i = 0; i < 4; ++i) {
        psi_small[i] = cd(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    psi_small /= psi_small.norm();
    for (int i = 0; i < 4; ++i) psi_full[sector[static_cast<size_t>(i)]] = psi_small[i];

    const double t = 1.7;
    const auto lrho = detail::lindblad_apply(cfg, test_pulse(), t, n_max, psi_full * psi_full.adjoint());

    // non-Hermitian sector dynamics: d(psi psi^dag) = -iH psi psi^dag + h.c.
    const Eigen::MatrixXcd h = effective_hamiltonian(cfg, test_pulse(), t);
    // basis order above: cavity, emitter1, emitter2, emitter3 (bits 0..2)
    const Eigen::VectorXcd dpsi = cd(0, -1) * (h * psi_small);
    const Eigen::MatrixXcd expected = dpsi * psi_small.adjoint() + psi_small * dpsi.adjoint();

    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(std::abs(lrho(sector[static_cast<size_t>(i)], sector[static_cast<size_t>(j)]) -
                           expected(i, j)) < 1e-12);
        }
    }
}

TEST_CASE("the generator is trace-free") {
    SplitMix64 rng(62);
    const auto cfg = config_of(2, {0.9, -1.2}, 0.6, 0.4);
    const int dim = 4 * 4;
    Eigen::MatrixXcd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) m(i, j) = cd(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    const Eigen::MatrixXcd rho = (m + m.adjoint()) * 0.5;
    const auto lrho = detail::lindblad_apply(cfg, Pulse::zero(), 0.3, 3, rho);
    CHECK(std::abs(lrho.trace()) < 1e-12 * rho.cwiseAbs().maxCoeff() * dim);
}

TEST_CASE("final state stays Hermitian, positive and trace-one") {
    const auto cfg = config_of(3, {1.5, -0.7, 0.1}, 0.5, 0.25);
    for (double horizon : {3.0, 15.0}) {
        HorizonPolicy policy = mp_policy(horizon, 1e-10);
        policy.residual_cutoff = 0.0;
        Eigen::MatrixXcd rho;
        exact_full_fidelity(cfg, test_pulse(), {5, true, 1e-6}, policy, &rho);
        CHECK((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-8 * std::max(1.0, horizon));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho + rho.adjoint()));
        CHECK(es.eigenvalues().minCoeff() > -1e-8);
    }
}

TEST_CASE("photon bookkeeping over the full space") {
    const auto cfg = config_of(3, {1.0, -0.5, 0.3}, 0.6, 0.4);
    HorizonPolicy policy = mp_policy(250.0, 1e-9);
    policy.residual_cutoff = 1e-8;
    const auto res = exact_full_fidelity(cfg, test_pulse(), {5, true, 1e-6}, policy);
    CHECK(std::abs(res.flux_integral + res.emitter_loss + res.residual - 3.0) < 1e-4);

    BinnedEnsemble ens;
    ens.bins = {{1.0, 2}, {-0.5, 2}};
    const auto bn = binned_fidelity(ens, Coupling::constant(0.6), 1.0, 0.4, test_pulse(),
                                    {6, true, 1e-6}, policy);
    CHECK(std::abs(bn.flux_integral + bn.emitter_loss + bn.residual - 4.0) < 1e-4);
}

TEST_CASE("normalized fidelity") {
    SUBCASE("homogeneous input gives one") {
        const auto cfg = config_of(3, {0.7, 0.7, 0.7}, 0.5, 0.0);
        BinnedEnsemble ens;
        ens.bins = {{0.7, 3}};
        const double raw =
            binned_fidelity(ens, cfg.coupling, 1.0, 0.0, Pulse::zero(), {5, true, 1e-6}, mp_policy())
                .value;
        CHECK(normalized_fidelity(raw, cfg, {5, true, 1e-6}, mp_policy()) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("disorder only degrades the unmodulated fidelity") {
        const auto cfg = config_of(4, {2.5, 2.5, -2.5, -2.5}, 0.5, 0.0);
        const auto raw = exact_full_fidelity(cfg, Pulse::zero(), {6, true, 1e-6}, mp_policy());
        const double norm = normalized_fidelity(raw.value, cfg, {6, true, 1e-6}, mp_policy());
        CHECK(norm < 1.0);
        CHECK(norm > 0.0);
    }
    SUBCASE("vanishing baseline is an error") {
        const auto cfg = config_of(2, {0.1, -0.1}, 0.0, 0.0);
        CHECK_THROWS_AS(normalized_fidelity(0.0, cfg, {4, true, 1e-6}, mp_policy(5.0)),
                        std::runtime_error);
    }
}

TEST_CASE("guards and flags") {
    SUBCASE("state-space guard") {
        SystemConfig big;
        big.n_emitters = 9;
        big.emitter_freqs.assign(9, 0.0);
        big.coupling = Coupling::constant(0.5);
        CHECK_THROWS_AS(exact_full_fidelity(big, Pulse::zero(), {11, true, 1e-6}, mp_policy()),
                        std::length_error);
    }
    SUBCASE("truncation below N requires monitoring") {
        const FockTruncation unmonitored{2, false, 1e-6};
        CHECK_THROWS_AS(unmonitored.validate(4), std::invalid_argument);
        const FockTruncation monitored{2, true, 1e-6};
        CHECK_NOTHROW(monitored.validate(4));
    }
    SUBCASE("visible truncation is flagged") {
        const auto cfg = config_of(4, {0.0, 0.0, 0.0, 0.0}, 1.0, 0.0);
        const auto res = exact_full_fidelity(cfg, Pulse::zero(), {2, true, 1e-6}, mp_policy(30.0));
        CHECK(res.leak_flagged);
        CHECK(res.leakage > 1e-6);
    }
    SUBCASE("bin validation") {
        BinnedEnsemble bad;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad.bins = {{0.0, 0}};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        const auto ens = BinnedEnsemble::from_frequencies({1.0, 1.0, -1.0, 2.0});
        CHECK(ens.bins.size() == 3);
        CHECK(ens.total() == 4);
    }
}
