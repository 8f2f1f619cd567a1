#pragma once

#include "vaedyn/common.hpp"
#include "vaedyn/generative.hpp"

namespace vaedyn {

/// Learning hyperparameters of the linear VAE.
struct Hyper {
    double beta = 1.0;
    double lambda = 0.0;
    double tau_W = 0.01;
    double tau_V = 0.01;
    double tau_D = 0.01;

    void validate() const;
};

/// Microscopic student: decoder W (N x M), encoder V (N x M) and diagonal
/// posterior variances D (length M).
struct MicroState {
    MatrixXd W;
    MatrixXd V;
    VectorXd D;
    Hyper hyper;

    int N() const { return int(W.rows()); }
    int M() const { return int(W.cols()); }
    void validate() const;
};

/// Initial condition. Each latent k is planted on factor k mod M* with overlap
/// `overlap * 2^-(k / M*)` on both decoder and encoder, on top of i.i.d. normal
/// noise of standard deviation `scale`. D starts at one.
struct InitOptions {
    double scale = 0.1;
    double overlap = 0.0;
    /// Accept scale == 0 and overlap == 0, which is a stationary point of the W/V dynamics.
    bool allow_zero = false;
};

/// The M* x M matrix A with W = W* A + scale * G.
MatrixXd planted_overlaps(int M, int M_star, double overlap);

MicroState init_micro(const GenerativeConfig& cfg, int M, const Hyper& hyper, const InitOptions& init, Rng& rng);

struct ElboTerms {
    double total = 0.0;
    double distortion = 0.0;
    double rate = 0.0;
};

struct ElboGradient {
    MatrixXd W;
    MatrixXd V;
    VectorXd D;
};

/// Per-sample loss r: distortion + beta * rate + lambda / (2N) (|W|^2 + |V|^2).
ElboTerms elbo_loss(const MicroState& s, const VectorXd& x);

/// Analytic gradient of `elbo_loss(s, x).total` with respect to W, V and D.
ElboGradient elbo_gradient(const MicroState& s, const VectorXd& x);

/// One-pass SGD update written in the projected form
///   w_m -= tau_W / N ( sum_n w_n mu_n mu_m + (D_m + lambda) w_m - sqrt(N) x mu_m )
///   v_m -= tau_V / N ( sqrt(N) x a_m + lambda v_m )
///   D_m -= tau_D / (2N) ( Q_mm + beta - beta / D_m )
/// with mu_m = sqrt(rho) d_m.c + sqrt(eta) zeta_m and
/// a_m = (Q mu)_m + beta mu_m - (sqrt(rho) m_m.c + sqrt(eta) u_m).
/// Throws NumericalError when D would leave (0, inf).
void sgd_step_inplace(MicroState& s, const Sample& sample, const GenerativeConfig& cfg);

MicroState sgd_step(const MicroState& s, const Sample& sample, const GenerativeConfig& cfg);

}  // namespace vaedyn
