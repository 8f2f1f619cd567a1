#pragma once

#include "vaedyn/common.hpp"
#include "vaedyn/macro_state.hpp"
#include "vaedyn/schedule.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace vaedyn {

/// Sign convention of the tau_W tau_V term in dR/dt.
///   derived: -eta tau_W tau_V (...), the conditional mean of the SGD increment.
///   unit:    +tau_W tau_V (...), coefficient one.
enum class RCrossTerm { derived, unit };

struct OdeParams {
    double rho = 1.0;
    double eta = 1.0;
    double lambda = 0.0;
    double tau_W = 0.01;
    double tau_V = 0.01;
    double tau_D = 0.01;
    BetaSchedule schedule = BetaSchedule::constant(1.0);

    /// Drop the O(tau^2) terms: the small-learning-rate limit in which the
    /// closed-form fixed points and spectra hold exactly.
    bool small_rate_limit = false;
    /// dD/dt = (tau_D / 2)(beta / D - Q_mm - beta). The factor 1/2 is what the
    /// SGD update produces; false restores the variant without it.
    bool d_drift_half_factor = true;
    RCrossTerm r_cross = RCrossTerm::derived;

    double tau_max() const { return std::max({tau_W, tau_V, tau_D}); }
    void set_tau(double tau) { tau_W = tau_V = tau_D = tau; }
    void validate() const;
};

/// h(A, B, C) = rho <A, B> + eta C.
template <typename DerivedA, typename DerivedB, typename Scalar>
Scalar helper_h(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, Scalar c,
                double rho, double eta) {
    if (a.size() != b.size()) throw ConfigError("helper_h: length mismatch");
    return Scalar(rho) * a.cwiseProduct(b).sum() + Scalar(eta) * c;
}

/// dM/dt of the order parameters at KL weight `beta`. The teacher overlap m* is the identity.
///
/// With Hdd = rho d d^T + eta E, Hdm = rho d m^T + eta R^T, Hmm = rho m m^T + eta Q,
/// P = rho + eta and A = Q + beta I:
///   dm = -tW (Hdd m + diag(D + lambda) m - P d)
///   dd = -tV (P Q d + beta P d - P m + lambda d)
///   dQ = -tW (diag(D) Q + Q diag(D) + 2 lambda Q - Hdm - Hdm^T + Q Hdd + Hdd Q) + eta tW^2 Hdd
///   dE = -tV (2 beta Hdd - Hdm - Hdm^T + 2 lambda E + Hdd Q + Q Hdd)
///        + eta tV^2 (A Hdd A - A Hdm - Hdm^T A + Hmm)
///   dR = -tW (Hdd R - Hdd + diag(D + lambda) R) - tV (Hdm^T Q + beta Hdm^T - Hmm + lambda R)
///        + c_R tW tV (Hdd A - Hdm)
///   dD = c_D tD (beta / D - diag(Q) - beta)
template <typename Scalar>
MacroState<Scalar> ode_rhs(const MacroState<Scalar>& s, const OdeParams& p, Scalar beta) {
    using MatS = Mat<Scalar>;
    const int M = s.M();
    for (int i = 0; i < M; ++i)
        if (s.D[i] == Scalar(0)) throw NumericalError("ode_rhs: zero posterior variance D_" + std::to_string(i + 1));

    const Scalar rho(p.rho), eta(p.eta), lam(p.lambda);
    const Scalar tW(p.tau_W), tV(p.tau_V), tD(p.tau_D);
    const Scalar P = rho + eta;
    const MatS I = MatS::Identity(M, M);

    const MatS Hdd = rho * s.d * s.d.transpose() + eta * s.E;
    const MatS Hdm = rho * s.d * s.m.transpose() + eta * s.R.transpose();
    const MatS Hmm = rho * s.m * s.m.transpose() + eta * s.Q;
    const MatS A = s.Q + beta * I;
    const auto Dl = (s.D.array() + lam).matrix().asDiagonal();

    MacroState<Scalar> f;
    f.m = -tW * (Hdd * s.m + Dl * s.m - P * s.d);
    f.d = -tV * (P * s.Q * s.d + beta * P * s.d - P * s.m + lam * s.d);
    f.Q = -tW * (s.D.asDiagonal() * s.Q + s.Q * s.D.asDiagonal() + Scalar(2) * lam * s.Q - Hdm - Hdm.transpose() +
                 s.Q * Hdd + Hdd * s.Q);
    f.E = -tV * (Scalar(2) * beta * Hdd - Hdm - Hdm.transpose() + Scalar(2) * lam * s.E + Hdd * s.Q + s.Q * Hdd);
    f.R = -tW * (Hdd * s.R - Hdd + Dl * s.R) -
          tV * (Hdm.transpose() * s.Q + beta * Hdm.transpose() - Hmm + lam * s.R);
    if (!p.small_rate_limit) {
        f.Q += eta * tW * tW * Hdd;
        f.E += eta * tV * tV * (A * Hdd * A - A * Hdm - Hdm.transpose() * A + Hmm);
        const Scalar cR = p.r_cross == RCrossTerm::derived ? -eta * tW * tV : tW * tV;
        f.R += cR * (Hdd * A - Hdm);
    }
    const Scalar cD = p.d_drift_half_factor ? Scalar(0.5) : Scalar(1);
    f.D = cD * tD * (beta * s.D.array().inverse() - s.Q.diagonal().array() - beta).matrix();
    f.symmetrize();
    return f;
}

/// Generalisation error rho M* - 2 sqrt(rho) sum_l |m_{pi(l), l}| + tr Q, where pi is the
/// injective latent/factor assignment maximising the matched |m| sum.
template <typename Scalar>
Scalar generalization_error(const MacroState<Scalar>& s, double rho);

/// Best matched |m| sum and the assignment factor -> latent (-1 when unmatched).
template <typename Scalar>
Scalar best_matching(const Mat<Scalar>& m, std::vector<int>* assignment = nullptr);

namespace detail {
template <typename Scalar>
void match_search(const Mat<Scalar>& m, int l, std::vector<int>& cur, std::vector<bool>& used, Scalar acc,
                  Scalar& best, std::vector<int>& best_assign) {
    const int M = int(m.rows()), K = int(m.cols());
    if (l == K) {
        if (acc > best) {
            best = acc;
            best_assign = cur;
        }
        return;
    }
    for (int i = 0; i < M; ++i) {
        if (used[i]) continue;
        used[i] = true;
        cur[l] = i;
        match_search(m, l + 1, cur, used, acc + std::abs(m(i, l)), best, best_assign);
        used[i] = false;
    }
    // leaving a factor unmatched never beats matching it, except when latents run out
    cur[l] = -1;
    match_search(m, l + 1, cur, used, acc, best, best_assign);
}
}  // namespace detail

template <typename Scalar>
Scalar best_matching(const Mat<Scalar>& m, std::vector<int>* assignment) {
    std::vector<int> cur(m.cols(), -1), best_assign(m.cols(), -1);
    std::vector<bool> used(m.rows(), false);
    Scalar best(-1);
    detail::match_search<Scalar>(m, 0, cur, used, Scalar(0), best, best_assign);
    if (assignment) *assignment = best_assign;
    return best;
}

template <typename Scalar>
Scalar generalization_error(const MacroState<Scalar>& s, double rho) {
    const Scalar matched = best_matching<Scalar>(s.m);
    return Scalar(rho) * Scalar(s.M_star()) - Scalar(2) * std::sqrt(Scalar(rho)) * matched + s.Q.trace();
}

}  // namespace vaedyn
