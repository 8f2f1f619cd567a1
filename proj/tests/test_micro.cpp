#include "checks.hpp"

#include <doctest.h>

#include <random>

using namespace vaedyn;

using checks::random_student;

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        CAPTURE(rep);
        CHECK(checks::gradient_check(rep, rng) < 1e-5);
    }
}

TEST_CASE("projected SGD step is a gradient step with rates tau_W, tau_V and tau_D / N") {
    Rng rng(8);
    const GenerativeConfig cfg = GenerativeConfig::make(200, 2, 1.3, 0.7, rng);
    const MicroState s = random_student(cfg, 3, rng, 0.8, 0.4);
    for (int rep = 0; rep < 5; ++rep) {
        const Sample smp = draw_sample(cfg, rng);
        const ElboGradient g = elbo_gradient(s, smp.x);
        const MicroState next = sgd_step(s, smp, cfg);
        CHECK((next.W - (s.W - s.hyper.tau_W * g.W)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((next.V - (s.V - s.hyper.tau_V * g.V)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((next.D - (s.D - s.hyper.tau_D / s.N() * g.D)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("teacher has orthonormal columns of norm sqrt(N)") {
    Rng rng(4);
    const GenerativeConfig cfg = GenerativeConfig::make(300, 3, 1.0, 1.0, rng);
    CHECK(((cfg.W_star.transpose() * cfg.W_star) / 300.0 - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sample covariance matches the spiked model") {
    Rng rng(9);
    const int N = 40;
    const GenerativeConfig cfg = GenerativeConfig::make(N, 2, 2.0, 0.5, rng);
    MatrixXd C = MatrixXd::Zero(N, N);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const VectorXd x = draw_sample(cfg, rng).x;
        C.noalias() += x * x.transpose();
    }
    C /= n;
    const MatrixXd want = 2.0 / N * cfg.W_star * cfg.W_star.transpose() + 0.5 * MatrixXd::Identity(N, N);
    // entries have standard error about sqrt(2 / n) * 0.5..2.5
    CHECK((C - want).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("D update rejects a step that leaves the positive axis") {
    Rng rng(2);
    const GenerativeConfig cfg = GenerativeConfig::make(10, 1, 1.0, 1.0, rng);
    MicroState s = random_student(cfg, 1, rng, 1.0, 1.0);
    s.hyper.tau_D = 1e4;
    s.D[0] = 10.0;
    CHECK_THROWS_AS(sgd_step(s, draw_sample(cfg, rng), cfg), NumericalError);
}

namespace {

checks::DriftEstimate drift_at(double tau, std::uint64_t seed) {
    return checks::estimate_drift(1000, 2, 1.2, 0.8, tau, 0.6, 4000, seed);
}

}  // namespace

TEST_CASE("SGD drift agrees with the macroscopic ODE, including the O(tau^2) terms") {
    const int N = 1000;
    for (double tau : {0.1, 0.5}) {
        const auto e = drift_at(tau, 100 + std::uint64_t(tau * 10));
        const double z = checks::worst_z(e, e.params, 1e-9 + 3.0 / N);
        CAPTURE(tau);
        CHECK(e.se.maxCoeff() < 0.02);
        MESSAGE("drift worst z at tau=" << tau << ": " << z);
        CHECK(z < 4.0);
    }
}

TEST_CASE("a unit cross-term coefficient and an unhalved D drift disagree with SGD") {
    const int N = 1000;
    const auto e = drift_at(0.5, 105);

    OdeParams unit_r = e.params;
    unit_r.r_cross = RCrossTerm::unit;
    const double zr = checks::worst_z(e, unit_r, 1e-9 + 3.0 / N);
    MESSAGE("unit cross term: worst z " << zr);
    CHECK(zr > 10.0);

    OdeParams full_d = e.params;
    full_d.d_drift_half_factor = false;
    const double zd = checks::worst_z(e, full_d, 1e-9 + 3.0 / N);
    MESSAGE("unhalved D drift: worst z " << zd);
    CHECK(zd > 10.0);

    OdeParams first_order = e.params;
    first_order.small_rate_limit = true;
    const double z1 = checks::worst_z(e, first_order, 1e-9 + 3.0 / N);
    MESSAGE("first-order drift only: worst z " << z1);
    CHECK(z1 > 10.0);
}
