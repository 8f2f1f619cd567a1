#include "vaedyn/generative.hpp"

#include <cmath>

namespace vaedyn {

GenerativeConfig GenerativeConfig::make(int N, int M_star, double rho, double eta, Rng& rng) {
    require(N > 0 && M_star > 0, "generative: N and M_star must be positive");
    require(M_star <= N, "generative: M_star must not exceed N");
    GenerativeConfig cfg;
    cfg.N = N;
    cfg.M_star = M_star;
    cfg.rho = rho;
    cfg.eta = eta;
    const MatrixXd g = standard_normal(N, M_star, rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    cfg.W_star = qr.householderQ() * MatrixXd::Identity(N, M_star) * std::sqrt(double(N));
    cfg.validate();
    return cfg;
}

void GenerativeConfig::validate(double tol) const {
    require(N > 0 && M_star > 0 && M_star <= N, "generative: bad dimensions");
    require(rho >= 0.0 && eta >= 0.0, "generative: rho and eta must be nonnegative");
    require(W_star.rows() == N && W_star.cols() == M_star, "generative: W_star has wrong shape");
    const MatrixXd gram = W_star.transpose() * W_star / double(N);
    const double err = (gram - MatrixXd::Identity(M_star, M_star)).cwiseAbs().maxCoeff();
    require(err <= tol, "generative: W_star^T W_star / N deviates from identity by " + std::to_string(err));
}

Sample draw_sample(const GenerativeConfig& cfg, Rng& rng) {
    Sample s;
    s.c = standard_normal(cfg.M_star, rng);
    s.n = standard_normal(cfg.N, rng);
    s.x = std::sqrt(cfg.rho / cfg.N) * (cfg.W_star * s.c) + std::sqrt(cfg.eta) * s.n;
    return s;
}

}  // namespace vaedyn
