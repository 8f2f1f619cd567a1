#pragma once

// Measurements shared by the unit tests and the acceptance run: finite-difference
// gradient check and the Monte-Carlo SGD drift estimate.

#include "vaedyn/micro.hpp"
#include "vaedyn/ode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace checks {

using namespace vaedyn;

inline MicroState random_student(const GenerativeConfig& cfg, int M, Rng& rng, double beta, double tau) {
    Hyper h;
    h.beta = beta;
    h.lambda = 0.05;
    h.tau_W = h.tau_V = h.tau_D = tau;
    InitOptions init;
    init.scale = 0.6;
    init.overlap = 0.5;
    MicroState s = init_micro(cfg, M, h, init, rng);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (int k = 0; k < M; ++k) s.D[k] = u(rng);
    return s;
}

/// Worst relative error (floored at scale 1) of elbo_gradient against central
/// differences of elbo_loss over every coordinate, on random instance `rep`.
inline double gradient_check(int rep, Rng& rng) {
    const int N = 12 + rep, M = 1 + rep % 3, K = 1 + rep % 2;
    const GenerativeConfig cfg = GenerativeConfig::make(N, K, 1.0 + 0.1 * rep, 0.5, rng);
    MicroState s = random_student(cfg, M, rng, 0.3 + 0.1 * rep, 0.1);
    const VectorXd x = draw_sample(cfg, rng).x;
    const ElboGradient g = elbo_gradient(s, x);
    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = elbo_loss(s, x).total;
        slot = keep - h;
        const double dn = elbo_loss(s, x).total;
        slot = keep;
        const double fd = (up - dn) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
    };
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < M; ++k) {
            probe(s.W(i, k), g.W(i, k));
            probe(s.V(i, k), g.V(i, k));
        }
    for (int k = 0; k < M; ++k) probe(s.D[k], g.D[k]);
    return worst;
}

struct DriftEstimate {
    VectorXd mean;
    VectorXd se;
    Macro at;
    double beta = 0.0;
    OdeParams params;
};

/// Mean one-step increment of the order parameters, times N, at a random student.
/// Antithetic pairs (c, n) -> (-c, -n) cancel the odd part of the noise exactly.
inline DriftEstimate estimate_drift(int N, int M, double rho, double eta, double tau, double beta, int pairs,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const GenerativeConfig cfg = GenerativeConfig::make(N, 1, rho, eta, rng);
    const MicroState s = random_student(cfg, M, rng, beta, tau);
    const Macro base = measure_macro(s, cfg);
    const VectorXd f0 = flatten(base);
    const int P = int(f0.size());
    VectorXd sum = VectorXd::Zero(P), sum2 = VectorXd::Zero(P);
    for (int i = 0; i < pairs; ++i) {
        Sample a = draw_sample(cfg, rng);
        Sample b{-a.x, -a.c, -a.n};
        const VectorXd y = 0.5 * double(N) *
                           (flatten(measure_macro(sgd_step(s, a, cfg), cfg)) +
                            flatten(measure_macro(sgd_step(s, b, cfg), cfg)) - 2.0 * f0);
        sum += y;
        sum2 += y.cwiseProduct(y);
    }
    DriftEstimate e;
    e.mean = sum / pairs;
    const VectorXd var = (sum2 / pairs - e.mean.cwiseProduct(e.mean)).cwiseMax(0.0) * (pairs / (pairs - 1.0));
    e.se = (var / pairs).cwiseSqrt();
    e.at = base;
    e.beta = beta;
    e.params.rho = rho;
    e.params.eta = eta;
    e.params.lambda = s.hyper.lambda;
    e.params.set_tau(tau);
    return e;
}

/// Largest |mean - F| / (se + floor) over coordinates. The D increment is
/// deterministic (se = 0), so some floor is always needed.
inline double worst_z(const DriftEstimate& e, const OdeParams& p, double floor) {
    const VectorXd F = flatten(ode_rhs(e.at, p, e.beta));
    return ((e.mean - F).cwiseAbs().array() / (e.se.array() + floor)).maxCoeff();
}

}  // namespace checks
