#include "vaedyn/micro.hpp"

#include <cmath>
#include <numbers>

namespace vaedyn {

void Hyper::validate() const {
    require(beta >= 0.0, "hyper: beta must be nonnegative");
    require(lambda >= 0.0, "hyper: lambda must be nonnegative");
    require(tau_W > 0.0 && tau_V > 0.0 && tau_D > 0.0, "hyper: learning rates must be positive");
}

void MicroState::validate() const {
    require(W.rows() == V.rows() && W.cols() == V.cols(), "micro: W and V shapes differ");
    require(D.size() == W.cols(), "micro: D length must equal latent dimension");
    require(W.allFinite() && V.allFinite() && D.allFinite(), "micro: non-finite entries");
    require((D.array() > 0.0).all(), "micro: posterior variances must be positive");
}

MatrixXd planted_overlaps(int M, int M_star, double overlap) {
    MatrixXd a = MatrixXd::Zero(M_star, M);
    for (int k = 0; k < M; ++k) a(k % M_star, k) = overlap * std::ldexp(1.0, -(k / M_star));
    return a;
}

MicroState init_micro(const GenerativeConfig& cfg, int M, const Hyper& hyper, const InitOptions& init, Rng& rng) {
    require(M >= 1, "init: latent dimension must be at least 1");
    require(init.scale >= 0.0, "init: scale must be nonnegative");
    require(init.allow_zero || init.scale > 0.0 || init.overlap != 0.0,
            "init: exactly-zero start is stationary; set allow_zero to use it");
    hyper.validate();
    MicroState s;
    s.hyper = hyper;
    const MatrixXd a = planted_overlaps(M, cfg.M_star, init.overlap);
    s.W = cfg.W_star * a + init.scale * standard_normal(cfg.N, M, rng);
    s.V = cfg.W_star * a + init.scale * standard_normal(cfg.N, M, rng);
    s.D = VectorXd::Ones(M);
    return s;
}

ElboTerms elbo_loss(const MicroState& s, const VectorXd& x) {
    require(x.size() == s.N(), "elbo: x has wrong length");
    require((s.D.array() > 0.0).all(), "elbo: posterior variances must be positive");
    const double N = s.N();
    const double sqrtN = std::sqrt(N);
    const VectorXd mu = s.V.transpose() * x / sqrtN;
    const VectorXd resid = x - s.W * mu / sqrtN;
    const VectorXd wnorm2 = s.W.colwise().squaredNorm().transpose();

    ElboTerms t;
    t.distortion = 0.5 * resid.squaredNorm() + 0.5 / N * s.D.dot(wnorm2) + 0.5 * N * std::log(2.0 * std::numbers::pi);
    t.rate = 0.5 * (s.D.array() + mu.array().square() - s.D.array().log() - 1.0).sum();
    t.total = t.distortion + s.hyper.beta * t.rate +
              0.5 * s.hyper.lambda / N * (s.W.squaredNorm() + s.V.squaredNorm());
    return t;
}

ElboGradient elbo_gradient(const MicroState& s, const VectorXd& x) {
    require(x.size() == s.N(), "elbo: x has wrong length");
    const double N = s.N();
    const double sqrtN = std::sqrt(N);
    const double beta = s.hyper.beta;
    const double lambda = s.hyper.lambda;
    const VectorXd mu = s.V.transpose() * x / sqrtN;
    const VectorXd resid = x - s.W * mu / sqrtN;

    ElboGradient g;
    g.W = -(resid * mu.transpose()) / sqrtN + s.W * s.D.asDiagonal() / N + lambda / N * s.W;
    const VectorXd dmu = -s.W.transpose() * resid / sqrtN + beta * mu;
    g.V = x * dmu.transpose() / sqrtN + lambda / N * s.V;
    const VectorXd wnorm2 = s.W.colwise().squaredNorm().transpose();
    g.D = (0.5 / N * wnorm2.array() + 0.5 * beta * (1.0 - s.D.array().inverse())).matrix();
    return g;
}

void sgd_step_inplace(MicroState& s, const Sample& sample, const GenerativeConfig& cfg) {
    const int M = s.M();
    const double N = s.N();
    const double sqrtN = std::sqrt(N);
    const double sr = std::sqrt(cfg.rho);
    const double se = std::sqrt(cfg.eta);
    const Hyper& h = s.hyper;

    // order parameters and Gaussian projections at the current state
    const MatrixXd m = s.W.transpose() * cfg.W_star / N;
    const MatrixXd d = s.V.transpose() * cfg.W_star / N;
    const MatrixXd Q = s.W.transpose() * s.W / N;
    const VectorXd zeta = s.V.transpose() * sample.n / sqrtN;
    const VectorXd u = s.W.transpose() * sample.n / sqrtN;

    const VectorXd mu = sr * d * sample.c + se * zeta;
    const VectorXd y = sr * m * sample.c + se * u;
    const VectorXd a = Q * mu + h.beta * mu - y;
    const VectorXd sx = sr * cfg.W_star * sample.c + se * sqrtN * sample.n;  // sqrt(N) x

    MatrixXd gw = s.W * (mu * mu.transpose()) - sx * mu.transpose();
    gw += s.W * (s.D.array() + h.lambda).matrix().asDiagonal();
    MatrixXd gv = sx * a.transpose() + h.lambda * s.V;

    VectorXd D_next(M);
    for (int k = 0; k < M; ++k) {
        D_next[k] = s.D[k] - h.tau_D / (2.0 * N) * ((Q(k, k) + h.beta) - h.beta / s.D[k]);
        if (!(D_next[k] > 0.0) || !std::isfinite(D_next[k]))
            throw NumericalError("sgd: posterior variance D_" + std::to_string(k + 1) +
                                 " left (0, inf); step size too large");
    }
    s.W.noalias() -= h.tau_W / N * gw;
    s.V.noalias() -= h.tau_V / N * gv;
    s.D = D_next;
}

MicroState sgd_step(const MicroState& s, const Sample& sample, const GenerativeConfig& cfg) {
    MicroState next = s;
    sgd_step_inplace(next, sample, cfg);
    return next;
}

}  // namespace vaedyn
