#include "oracles.hpp"
#include "vaedyn/integrate.hpp"
#include "vaedyn/stability.hpp"

#include <doctest.h>

#include <random>

using namespace vaedyn;

namespace {

Macro random_macro(int M, int K, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Macro s = Macro::zeros(M, K);
    for (int i = 0; i < M; ++i) {
        for (int l = 0; l < K; ++l) {
            s.m(i, l) = u(rng);
            s.d(i, l) = u(rng);
        }
        for (int j = 0; j < M; ++j) s.R(i, j) = u(rng);
        s.D[i] = 0.3 + std::abs(u(rng));
    }
    const MatrixXd a = MatrixXd::NullaryExpr(M, M, [&] { return u(rng); });
    const MatrixXd b = MatrixXd::NullaryExpr(M, M, [&] { return u(rng); });
    s.Q = a * a.transpose();
    s.E = b * b.transpose();
    return s;
}

double sup_diff(const Macro& a, const Macro& b) { return (flatten(a) - flatten(b)).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("ode_rhs agrees with an entry-by-entry transcription of F") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    const std::pair<int, int> shapes[] = {{1, 1}, {2, 1}, {2, 2}, {3, 2}, {4, 4}};
    for (auto [M, K] : shapes)
        for (int rep = 0; rep < 5; ++rep) {
            const Macro s = random_macro(M, K, rng);
            OdeParams p;
            p.rho = u(rng);
            p.eta = u(rng);
            p.lambda = 0.3 * u(rng);
            p.tau_W = u(rng);
            p.tau_V = u(rng);
            p.tau_D = u(rng);
            const double beta = u(rng);
            oracle::Coeffs c{p.rho, p.eta, p.lambda, p.tau_W, p.tau_V, p.tau_D};

            // derived defaults
            c.c_R = -p.eta;
            c.c_D = 0.5;
            CHECK(sup_diff(ode_rhs(s, p, beta), oracle::literal_F(s, c, beta)) < 1e-12);

            // unit cross term, unhalved D drift
            p.r_cross = RCrossTerm::unit;
            p.d_drift_half_factor = false;
            c.c_R = 1.0;
            c.c_D = 1.0;
            CHECK(sup_diff(ode_rhs(s, p, beta), oracle::literal_F(s, c, beta)) < 1e-12);

            p.small_rate_limit = true;
            c.second_order = false;
            CHECK(sup_diff(ode_rhs(s, p, beta), oracle::literal_F(s, c, beta)) < 1e-12);
        }
}

TEST_CASE("ode_rhs output is symmetric in Q and E and is generic in the scalar type") {
    Rng rng(3);
    const Macro s = random_macro(3, 2, rng);
    OdeParams p;
    p.set_tau(0.7);
    const Macro f = ode_rhs(s, p, 0.8);
    CHECK((f.Q - f.Q.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.E - f.E.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto fl = ode_rhs(s.cast<long double>(), p, 0.8L);
    CHECK(sup_diff(fl.cast<double>(), f) < 1e-12);
}

TEST_CASE("ode_rhs rejects a zero posterior variance") {
    Macro s = Macro::collapsed(1, 1);
    s.D[0] = 0.0;
    CHECK_THROWS_AS(ode_rhs(s, OdeParams{}, 1.0), NumericalError);
}

TEST_CASE("generalization error examples") {
    Macro s = Macro::zeros(1, 1);
    s.m(0, 0) = 1.0;
    s.Q(0, 0) = 1.0;
    CHECK(generalization_error(s, 1.0) == doctest::Approx(0.0));
    CHECK(generalization_error(Macro::zeros(2, 1), 1.0) == doctest::Approx(1.0));
    CHECK(generalization_error(Macro::zeros(3, 2), 0.7) == doctest::Approx(1.4));

    // mismatched overfitting point at beta = 0.5
    Macro o = Macro::zeros(2, 1);
    o.m(0, 0) = std::sqrt(1.5);
    o.Q(0, 0) = 1.5;
    o.Q(1, 1) = 0.5;
    CHECK(generalization_error(o, 1.0) == doctest::Approx(3.0 - 2.0 * std::sqrt(1.5)).epsilon(1e-14));
    CHECK(generalization_error(o, 1.0) == doctest::Approx(0.55051).epsilon(1e-5));
}

TEST_CASE("generalization error is invariant under latent permutations and sign flips") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Macro s = random_macro(3, 2, rng);
        const double e = generalization_error(s, 1.3);
        Macro t = s;
        t.m.row(0).swap(t.m.row(2));
        t.m.row(1) *= -1.0;
        CHECK(generalization_error(t, 1.3) == doctest::Approx(e).epsilon(1e-14));
    }
    // brute force over all injective assignments for M = 3, M* = 2
    Macro s = random_macro(3, 2, rng);
    double best = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            if (a != b) best = std::max(best, std::abs(s.m(a, 0)) + std::abs(s.m(b, 1)));
    CHECK(best_matching<double>(s.m) == doctest::Approx(best));
}

TEST_CASE("integration from a fixed point stays constant") {
    for (auto c : {ModelCase::matched, ModelCase::mismatched})
        for (double beta : {0.5, 1.5, 2.5})
            for (const auto& r : fixed_points(c, beta, 1.0, 1.0)) {
                OdeParams p = stability_params(1.0, 1.0);
                p.schedule = BetaSchedule::constant(beta);
                IntegrateOptions o;
                o.t_end = 50.0;
                o.record_points = 11;
                const Trajectory tr = integrate(r.point, p, o);
                for (const auto& s : tr.states) CHECK(frobenius_distance(s, r.point) < 1e-10);
            }
}

TEST_CASE("halving the default step changes recorded observables by less than 1e-8") {
    for (int M : {1, 2})
        for (double beta : {0.2, 1.0, 2.5})
            for (double tau : {0.01, 1.0}) {
                OdeParams p;
                p.set_tau(tau);
                p.small_rate_limit = tau == 1.0;
                p.schedule = BetaSchedule::constant(beta);
                IntegrateOptions o;
                o.t_end = 200.0 / tau;
                o.step_doubling_check = true;
                InitOptions init;
                init.overlap = 0.1;
                const Trajectory tr = integrate(expected_initial_macro(M, 1, init), p, o);
                CAPTURE(M);
                CAPTURE(beta);
                CAPTURE(tau);
                CHECK(tr.doubling_error < 1e-8);
                CHECK(tr.doubling_error >= 0.0);
            }
}

TEST_CASE("symmetry and positivity hold along trajectories") {
    InitOptions init;
    init.overlap = 0.1;
    OdeParams p;
    p.set_tau(0.05);
    for (double beta : {0.2, 1.0, 3.0}) {
        p.schedule = BetaSchedule::constant(beta);
        IntegrateOptions o;
        o.t_end = 2000.0;
        const Trajectory tr = integrate(expected_initial_macro(3, 2, init), p, o);
        for (const auto& s : tr.states) {
            CHECK((s.Q - s.Q.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK((s.E - s.E.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK(s.D.minCoeff() > 0.0);
            CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(s.Q).eigenvalues().minCoeff() > -1e-8);
            CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(s.E).eigenvalues().minCoeff() > -1e-8);
        }
    }
}

TEST_CASE("matched dynamics: optimum at beta = eta and collapse above rho + eta") {
    InitOptions init;
    init.overlap = 0.1;
    OdeParams p;
    p.set_tau(0.01);
    IntegrateOptions o;
    o.t_end = 5000.0;
    o.record_points = 101;

    p.schedule = BetaSchedule::constant(1.0);
    p.small_rate_limit = true;
    CHECK(integrate(expected_initial_macro(1, 1, init), p, o).eps_g.back() < 1e-3);

    p.small_rate_limit = false;
    p.schedule = BetaSchedule::constant(2.5);
    const Trajectory tr = integrate(expected_initial_macro(1, 1, init), p, o);
    CHECK(tr.eps_g.back() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(tr.states.back().m(0, 0)) < 1e-3);
}

TEST_CASE("overfitting transient: eps_g dips then rises at beta = 0.2") {
    InitOptions init;
    init.overlap = 0.1;
    OdeParams p;
    p.set_tau(0.01);
    p.schedule = BetaSchedule::constant(0.2);
    IntegrateOptions o;
    o.t_end = 3000.0;
    const Trajectory tr = integrate(expected_initial_macro(1, 1, init), p, o);
    const auto it = std::min_element(tr.eps_g.begin(), tr.eps_g.end());
    CHECK(it != tr.eps_g.begin());
    CHECK(it != tr.eps_g.end() - 1);
    CHECK(*it < tr.eps_g.back());
}

TEST_CASE("convergence_time examples") {
    Trajectory tr;
    for (int i = 0; i < 5; ++i) {
        tr.times.push_back(i);
        tr.states.push_back(Macro::collapsed(1, 1));
        tr.beta.push_back(1.0);
    }
    tr.eps_g = {0.5, 0.5, 0.5, 0.5, 0.5};
    CHECK(convergence_time(tr, 0.5, 1e-3).value() == 0.0);
    tr.eps_g = {0.9, 0.9, 0.9, 0.9, 0.9};
    CHECK_FALSE(convergence_time(tr, 0.5, 1e-3).has_value());
    tr.eps_g = {0.9, 0.5, 0.9, 0.5, 0.5};
    CHECK(convergence_time(tr, 0.5, 1e-3).value() == 3.0);
    CHECK_THROWS_AS(convergence_time(tr, 0.5, 0.0), ConfigError);
}

TEST_CASE("integrate aborts with a diagnostic when D crosses zero") {
    OdeParams p = stability_params(1.0, 1.0);
    p.schedule = BetaSchedule::constant(0.05);
    IntegrateOptions o;
    o.t_end = 100.0;
    o.dt = 5.0;
    o.record_points = 3;
    InitOptions init;
    init.overlap = 0.5;
    CHECK_THROWS_AS(integrate(expected_initial_macro(1, 1, init), p, o), NumericalError);
}

TEST_CASE("tanh schedule is integrated as a state and matches tanh(gamma t)") {
    OdeParams p = stability_params(1.0, 1.0);
    p.schedule = BetaSchedule::tanh(0.3);
    IntegrateOptions o;
    o.t_end = 20.0;
    o.record_points = 21;
    InitOptions init;
    init.overlap = 0.1;
    const Trajectory tr = integrate(expected_initial_macro(1, 1, init), p, o);
    for (std::size_t i = 0; i < tr.size(); ++i) CHECK(tr.beta[i] == doctest::Approx(std::tanh(0.3 * tr.times[i])).epsilon(1e-9));
}

TEST_CASE("constant schedule gives bit-identical runs to a plain fixed beta") {
    OdeParams a;
    a.schedule = BetaSchedule::constant(0.7);
    OdeParams b = a;
    b.schedule = BetaSchedule::step(0.7, 0.0, 5.0);
    IntegrateOptions o;
    o.t_end = 300.0;
    InitOptions init;
    init.overlap = 0.1;
    const Trajectory ta = integrate(expected_initial_macro(2, 1, init), a, o);
    const Trajectory tb = integrate(expected_initial_macro(2, 1, init), b, o);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(flatten(ta.states[i]) == flatten(tb.states[i]));
}
