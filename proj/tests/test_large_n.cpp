#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmtc/large_n.hpp"
#include "dmtc/rng.hpp"
#include "oracles.hpp"

using namespace dmtc;

TEST_CASE("no coupling means no dynamics") {
    const LargeNParams params{0.0, 2.0, 1.0};
    const auto traj = evolve_effective(params, Pulse::zero(), 20.0);
    for (const auto& s : traj.states) {
        CHECK(std::abs(s.alpha) == 0.0);
        CHECK(std::abs(s.beta) == 0.0);
    }
    CHECK(effective_fidelity(params, Pulse::zero()) == 0.0);
}

TEST_CASE("fidelity matches the frequency-domain oracle") {
    HorizonPolicy policy;
    policy.max_time = 300.0;
    policy.tol = 1e-11;
    SUBCASE("no inhomogeneous broadening") {
        for (double g : {0.4, 1.0, 3.0}) {
            const LargeNParams params{g, 0.0, 1.0};
            const double fid = effective_fidelity(params, Pulse::zero(), policy);
            const double ref = oracles::laplace_fidelity_oracle(g, 0.0, 1.0);
            CHECK(fid == doctest::Approx(ref).epsilon(1e-6));
            CHECK(ref == doctest::Approx(1.0).epsilon(1e-6));  // all excitation emitted
        }
    }
    SUBCASE("finite broadening") {
        for (double d0 : {0.3, 1.0, 5.0}) {
            const LargeNParams params{1.5, d0, 1.0};
            const double fid = effective_fidelity(params, Pulse::zero(), policy);
            const double ref = oracles::laplace_fidelity_oracle(1.5, d0, 1.0);
            CHECK(fid == doctest::Approx(ref).epsilon(1e-6));
        }
    }
}

TEST_CASE("excitation budget closes") {
    SplitMix64 rng(51);
    for (int trial = 0; trial < 6; ++trial) {
        LargeNParams params{rng.uniform(0.2, 3.0), rng.uniform(0.0, 8.0), 1.0};
        Pulse p;
        p.duration = 6.0;
        p.values = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
        const auto run = effective_run(params, p);
        CAPTURE(params.G);
        CAPTURE(params.delta0);
        CHECK(std::abs(run.fidelity + run.subradiant + run.residual - run.injected) < 1e-6);
    }
}

TEST_CASE("response is linear in the drive amplitude") {
    LargeNParams params{1.2, 0.8, 1.0};
    LargeNParams scaled = params;
    scaled.drive_scale = 2.0;
    Pulse p;
    p.duration = 5.0;
    p.values = {1.0, -2.0};

    const auto a = evolve_effective(params, p, 12.0, 1e-11);
    const auto b = evolve_effective(scaled, p, 12.0, 1e-11);
    CHECK(std::abs(b.states.back().alpha - 2.0 * a.states.back().alpha) < 1e-8);
    CHECK(std::abs(b.states.back().beta - 2.0 * a.states.back().beta) < 1e-8);

    const auto ra = effective_run(params, p);
    const auto rb = effective_run(scaled, p);
    CHECK(rb.fidelity == doctest::Approx(4.0 * ra.fidelity).epsilon(1e-7));
    CHECK(rb.subradiant == doctest::Approx(4.0 * ra.subradiant).epsilon(1e-7));
    CHECK(rb.injected == doctest::Approx(4.0 * ra.injected).epsilon(1e-7));
}

TEST_CASE("subradiant occupation vanishes without broadening") {
    const LargeNParams params{1.0, 0.0, 1.0};
    CHECK(subradiant_occupation(params, Pulse::zero()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("strong broadening suppresses emission monotonically") {
    const double G = 0.5;
    double prev = 2.0;
    for (double d0 : {1.0, 5.0, 20.0, 50.0}) {
        const double fid = effective_fidelity({G, d0, 1.0}, Pulse::zero());
        CHECK(fid < prev);
        prev = fid;
    }
    CHECK(effective_fidelity({0.3, 30.0, 1.0}, Pulse::zero()) < 0.1);
}

TEST_CASE("effective gradient matches finite differences") {
    SplitMix64 rng(52);
    const LargeNParams params{2.0, 3.0, 1.0};
    Pulse pulse;
    pulse.duration = 6.0;
    pulse.values.resize(8);
    for (double& v : pulse.values) v = rng.uniform(-3, 3);

    HorizonPolicy policy;
    policy.max_time = 25.0;
    policy.residual_cutoff = 0.0;
    policy.tol = 1e-12;
    const auto obj = make_effective_objective(params, policy);

    double val = 0;
    const Eigen::VectorXd grad = obj.gradient(pulse, &val);
    const auto fd = oracles::fd_gradient([&](const Pulse& p) { return obj.value(p); }, pulse, 1e-5);
    CHECK((grad - fd).norm() / fd.norm() < 1e-5);
    CHECK(val == doctest::Approx(obj.value(pulse)).epsilon(1e-9));
}

TEST_CASE("improvement scan: ratios floor at one and vanish with the disorder") {
    OptimizationOptions opts;
    opts.max_iters = 60;
    opts.restarts = 2;
    opts.restart_seed = 7;
    opts.method = OptimizationOptions::Method::Lbfgs;
    opts.horizon.max_time = 80.0;

    const auto cells = improvement_scan({1.0}, {1e-4, 2.0}, Pulse::zero(8.0, 40), opts);
    REQUIRE(cells.size() == 2);
    for (const auto& c : cells) CHECK(c.ratio >= 1.0 - 1e-6);
    CHECK(cells[0].ratio == doctest::Approx(1.0).epsilon(1e-3));  // delta0 -> 0
    CHECK(cells[1].ratio > cells[0].ratio);
    CHECK_THROWS_AS(improvement_scan({}, {1.0}, Pulse::zero(), opts), std::invalid_argument);
}
