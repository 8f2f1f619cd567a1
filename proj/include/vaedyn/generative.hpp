#pragma once

#include "vaedyn/common.hpp"

namespace vaedyn {

/// Teacher of the spiked covariance model
///   x = sqrt(rho/N) W* c + sqrt(eta) n,   c ~ N(0, I_{M*}),  n ~ N(0, I_N).
/// W* is normalised so that W*^T W* / N = I.
struct GenerativeConfig {
    int N = 0;
    int M_star = 0;
    double rho = 1.0;
    double eta = 1.0;
    MatrixXd W_star;

    /// Draws a Gaussian N x M* matrix, orthonormalises its columns and scales them by sqrt(N).
    static GenerativeConfig make(int N, int M_star, double rho, double eta, Rng& rng);

    /// Throws ConfigError when an invariant is violated.
    void validate(double tol = 1e-10) const;
};

struct Sample {
    VectorXd x;
    VectorXd c;
    VectorXd n;
};

Sample draw_sample(const GenerativeConfig& cfg, Rng& rng);

}  // namespace vaedyn
