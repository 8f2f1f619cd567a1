#include "vaedyn/stability.hpp"

#include <algorithm>
#include <cmath>

namespace vaedyn {

std::string to_string(ModelCase c) { return c == ModelCase::matched ? "matched" : "mismatched"; }

std::string to_string(FixedPointKind k) {
    switch (k) {
        case FixedPointKind::collapsed: return "collapsed";
        case FixedPointKind::learnable: return "learnable";
        case FixedPointKind::overfitting: return "overfitting";
        case FixedPointKind::other: return "other";
    }
    return "other";
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::stable: return "stable";
        case Verdict::marginal: return "marginal";
        case Verdict::unstable: return "unstable";
    }
    return "unstable";
}

ModelCase model_case_from_string(const std::string& s) {
    if (s == "matched") return ModelCase::matched;
    if (s == "mismatched") return ModelCase::mismatched;
    throw ConfigError("unknown case '" + s + "' (expected matched or mismatched)");
}

std::string FixedPointReport::branch_label() const {
    if (sign_branch == 0) return "0";
    std::string s = sign_branch > 0 ? "+" : "-";
    if (signal_latent >= 0) s += std::to_string(signal_latent + 1);
    return s;
}

OdeParams stability_params(double rho, double eta, double tau) {
    OdeParams p;
    p.rho = rho;
    p.eta = eta;
    p.lambda = 0.0;
    p.set_tau(tau);
    p.small_rate_limit = true;
    return p;
}

namespace {

VectorXd flat_rhs(const VectorXd& x, const OdeParams& p, double beta, int M, int K) {
    return flatten(ode_rhs(unflatten<double>(x, M, K), p, beta));
}

MatrixXd central_difference(const VectorXd& x0, const OdeParams& p, double beta, int M, int K, double h) {
    const Eigen::Index n = x0.size();
    MatrixXd J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        VectorXd xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (flat_rhs(xp, p, beta, M, K) - flat_rhs(xm, p, beta, M, K)) / (2.0 * h);
    }
    return J;
}

}  // namespace

namespace {

using Complex = std::complex<double>;
constexpr double kComplexStep = 1e-30;

MatrixXd complex_step(const VectorXd& x0, const OdeParams& p, double beta, int M, int K) {
    const Eigen::Index n = x0.size();
    MatrixXd J(n, n);
    Vec<Complex> x = x0.cast<Complex>();
    for (Eigen::Index j = 0; j < n; ++j) {
        x[j] += Complex(0.0, kComplexStep);
        const auto f = ode_rhs(unflatten<Complex>(x, M, K), p, Complex(beta));
        J.col(j) = flatten(f).imag() / kComplexStep;
        x[j] = x0[j];
    }
    return J;
}

}  // namespace

MatrixXd jacobian(const Macro& s, const OdeParams& p, double beta, const JacobianOptions& opt) {
    const int M = s.M(), K = s.M_star();
    const VectorXd x0 = flatten(s);
    if (opt.method == JacobianMethod::complex_step) {
        if (!(s.D.minCoeff() > 0.0)) throw NumericalError("jacobian: posterior variance must be positive");
        return complex_step(x0, p, beta, M, K);
    }
    require(opt.step > 0.0, "jacobian: step must be positive");
    if (s.D.minCoeff() <= 10.0 * opt.step)
        throw NumericalError("jacobian: posterior variance too close to zero for finite differences");
    if (!opt.richardson) return central_difference(x0, p, beta, M, K, opt.step);
    const MatrixXd coarse = central_difference(x0, p, beta, M, K, opt.step);
    const MatrixXd fine = central_difference(x0, p, beta, M, K, 0.5 * opt.step);
    return (4.0 * fine - coarse) / 3.0;
}

MatrixXd jacobian_annealed(const Macro& s, const OdeParams& p, double beta, double gamma,
                           const JacobianOptions& opt) {
    const MatrixXd J = jacobian(s, p, beta, opt);
    const Eigen::Index n = J.rows();
    MatrixXd Ja = MatrixXd::Zero(n + 1, n + 1);
    Ja.topLeftCorner(n, n) = J;
    if (opt.method == JacobianMethod::complex_step) {
        const auto f = ode_rhs(s.cast<Complex>(), p, Complex(beta, kComplexStep));
        Ja.col(n).head(n) = flatten(f).imag() / kComplexStep;
    } else {
        auto fb = [&](double b) { return flatten(ode_rhs(s, p, b)); };
        const double h = opt.step;
        const VectorXd coarse = (fb(beta + h) - fb(beta - h)) / (2.0 * h);
        if (opt.richardson) {
            const VectorXd fine = (fb(beta + 0.5 * h) - fb(beta - 0.5 * h)) / h;
            Ja.col(n).head(n) = (4.0 * fine - coarse) / 3.0;
        } else {
            Ja.col(n).head(n) = coarse;
        }
    }
    Ja(n, n) = -2.0 * gamma * beta;
    return Ja;
}

Eigen::VectorXcd spectrum(const MatrixXd& J) {
    Eigen::EigenSolver<MatrixXd> es(J, false);
    if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigenvalue iteration did not converge");
    return es.eigenvalues();
}

Verdict classify(const Eigen::VectorXcd& eigenvalues, double tol) {
    require(eigenvalues.size() > 0, "classify: empty spectrum");
    const double mx = eigenvalues.real().maxCoeff();
    if (mx < -tol) return Verdict::stable;
    if (mx <= tol) return Verdict::marginal;
    return Verdict::unstable;
}

void analyse(FixedPointReport& r, double tol) {
    const OdeParams p = stability_params(r.rho, r.eta);
    r.eigenvalues = spectrum(jacobian(r.point, p, r.beta));
    r.verdict = classify(r.eigenvalues, tol);
}

namespace {

FixedPointReport make_report(Macro point, FixedPointKind kind, int sign, int latent, double beta, double rho,
                             double eta) {
    FixedPointReport r;
    r.point = std::move(point);
    r.kind = kind;
    r.sign_branch = sign;
    r.signal_latent = latent;
    r.beta = beta;
    r.rho = rho;
    r.eta = eta;
    analyse(r);
    return r;
}

void check_inputs(double beta, double rho, double eta) {
    require(rho >= 0.0 && eta >= 0.0, "fixed points: rho and eta must be nonnegative");
    require(beta > 0.0, "fixed points: beta must be positive");
    require(rho + eta > 0.0, "fixed points: rho + eta must be positive");
}

}  // namespace

std::vector<FixedPointReport> fixed_points_matched(double beta, double rho, double eta) {
    check_inputs(beta, rho, eta);
    std::vector<FixedPointReport> out;
    out.push_back(make_report(Macro::collapsed(1, 1), FixedPointKind::collapsed, 0, -1, beta, rho, eta));
    const double P = rho + eta;
    if (beta <= P) {
        const double a = P - beta;
        for (int sign : {+1, -1}) {
            Macro s = Macro::zeros(1, 1);
            s.m(0, 0) = sign * std::sqrt(a);
            s.d(0, 0) = sign * std::sqrt(a) / P;
            s.Q(0, 0) = a;
            s.E(0, 0) = a / (P * P);
            s.R(0, 0) = a / P;
            s.D[0] = beta / P;
            out.push_back(make_report(std::move(s), FixedPointKind::learnable, sign, -1, beta, rho, eta));
        }
    }
    return out;
}

std::vector<FixedPointReport> fixed_points_mismatched(double beta, double rho, double eta) {
    check_inputs(beta, rho, eta);
    std::vector<FixedPointReport> out;
    out.push_back(make_report(Macro::collapsed(2, 1), FixedPointKind::collapsed, 0, -1, beta, rho, eta));
    const double P = rho + eta;
    if (beta > P) return out;
    const double a = P - beta;
    const double b = eta - beta;
    // overfitting exists while the superfluous latent's Q = eta - beta stays positive
    for (FixedPointKind kind : {FixedPointKind::overfitting, FixedPointKind::learnable}) {
        if (kind == FixedPointKind::overfitting && !(beta < eta && eta > 0.0)) continue;
        for (int latent : {0, 1}) {
            const int other = 1 - latent;
            for (int sign : {+1, -1}) {
                Macro s = Macro::zeros(2, 1);
                s.m(latent, 0) = sign * std::sqrt(a);
                s.d(latent, 0) = sign * std::sqrt(a) / P;
                s.Q(latent, latent) = a;
                s.E(latent, latent) = a / (P * P);
                s.R(latent, latent) = a / P;
                s.D[latent] = beta / P;
                if (kind == FixedPointKind::overfitting) {
                    s.Q(other, other) = b;
                    s.E(other, other) = b / (eta * eta);
                    s.R(other, other) = b / eta;
                    s.D[other] = beta / eta;
                } else {
                    s.D[other] = 1.0;
                }
                out.push_back(make_report(std::move(s), kind, sign, latent, beta, rho, eta));
            }
        }
    }
    return out;
}

std::vector<FixedPointReport> fixed_points(ModelCase c, double beta, double rho, double eta) {
    return c == ModelCase::matched ? fixed_points_matched(beta, rho, eta) : fixed_points_mismatched(beta, rho, eta);
}

double collapse_threshold(double rho, double eta) { return rho + eta; }

namespace {
bool in_jmax_band(double nu) {
    const double lo = (1.0 - 2.0 * std::sqrt(2.0) + std::sqrt(5.0)) / 4.0;
    const double hi = (1.0 + 2.0 * std::sqrt(2.0) + std::sqrt(5.0)) / 4.0;
    return lo <= nu && nu <= hi;
}
}  // namespace

double jmax(double nu, double tau) {
    require(tau > 0.0, "jmax: tau must be positive");
    if (in_jmax_band(nu)) return 0.5 * tau * (std::sqrt(5.0) - 3.0);
    return -tau * (2.0 * nu + 1.0) + tau * std::sqrt(4.0 * nu * (2.0 * nu - 1.0) + 1.0);
}

double jmax_alternative(double nu, double tau) {
    require(tau > 0.0, "jmax: tau must be positive");
    if (in_jmax_band(nu)) return 0.5 * tau * (std::sqrt(5.0) - 3.0);
    return -tau * (1.0 + 2.0 * nu) + tau * std::sqrt(1.0 - 4.0 * nu * (1.0 - 4.0 * nu));
}

double jmax_numeric(double nu, double tau) {
    require(tau > 0.0, "jmax: tau must be positive");
    require(nu > 0.0 && nu < 2.0, "jmax: nu must lie in (0, 2)");
    const double rho = 2.0 - nu, eta = nu;
    const auto pts = fixed_points_matched(1.0, rho, eta);
    const auto it = std::find_if(pts.begin(), pts.end(), [](const FixedPointReport& r) {
        return r.kind == FixedPointKind::learnable && r.sign_branch > 0;
    });
    const OdeParams p = stability_params(rho, eta, tau);
    return spectrum(jacobian(it->point, p, 1.0)).real().maxCoeff();
}

double anneal_slowdown_threshold(double nu, double tau) { return -0.5 * jmax(nu, tau); }

JmaxCheck jmax_verified(double nu, double tau) {
    return {jmax(nu, tau), jmax_numeric(nu, tau), jmax_alternative(nu, tau)};
}

double steady_state_eps(ModelCase c, double beta, double rho, double eta) {
    const double P = rho + eta;
    if (beta >= P) return rho;
    const double s = std::sqrt(P - beta);
    const double learn = rho - s * (2.0 * std::sqrt(rho) - s);
    if (c == ModelCase::mismatched && beta < eta) return learn + eta - beta;
    return learn;
}

std::vector<SweepRow> stability_sweep(ModelCase c, double rho, double eta, const std::vector<double>& betas,
                                      double tol) {
    require(!betas.empty(), "stability_sweep: beta grid is empty");
    std::vector<SweepRow> rows;
    for (double beta : betas) {
        const auto pts = fixed_points(c, beta, rho, eta);
        for (FixedPointKind kind :
             {FixedPointKind::collapsed, FixedPointKind::learnable, FixedPointKind::overfitting}) {
            const auto it = std::find_if(pts.begin(), pts.end(), [&](const FixedPointReport& r) {
                return r.kind == kind && r.sign_branch >= 0 && r.signal_latent <= 0;
            });
            if (it == pts.end()) continue;
            rows.push_back({beta, kind, it->max_real(), classify(it->eigenvalues, tol)});
        }
    }
    return rows;
}

std::vector<FixedPointReport> discover_fixed_points(ModelCase c, double beta, double rho, double eta, int starts,
                                                    Rng& rng) {
    check_inputs(beta, rho, eta);
    const int M = latent_dim(c), K = factor_dim(c);
    const OdeParams p = stability_params(rho, eta);
    const auto known = fixed_points(c, beta, rho, eta);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<FixedPointReport> found;

    for (int s = 0; s < starts; ++s) {
        Macro x0 = Macro::zeros(M, K);
        const double P = rho + eta;
        for (int i = 0; i < M; ++i) {
            x0.m(i, 0) = std::sqrt(P) * uni(rng);
            x0.d(i, 0) = x0.m(i, 0) / P;
            x0.D[i] = 0.5 + 0.5 * std::abs(uni(rng));
        }
        x0.Q = x0.m * x0.m.transpose() + 0.2 * MatrixXd::Identity(M, M) * std::abs(uni(rng));
        x0.E = x0.d * x0.d.transpose() + 0.05 * MatrixXd::Identity(M, M) * std::abs(uni(rng));
        x0.R = x0.m * x0.d.transpose();
        VectorXd x = flatten(x0);
        auto resid = [&](const VectorXd& v) { return flat_rhs(v, p, beta, M, K); };

        bool ok = false;
        for (int it = 0; it < 100; ++it) {
            const VectorXd f = resid(x);
            if (f.lpNorm<Eigen::Infinity>() < 1e-13) {
                ok = true;
                break;
            }
            Macro cur = unflatten<double>(x, M, K);
            if (cur.D.minCoeff() <= 1e-6) break;
            const MatrixXd J = jacobian(cur, p, beta);
            const VectorXd step = J.completeOrthogonalDecomposition().solve(-f);
            double t = 1.0;
            const double f0 = f.norm();
            while (t > 1e-6) {
                VectorXd trial = x + t * step;
                const Macro tm = unflatten<double>(trial, M, K);
                if (tm.D.minCoeff() > 0.0 && resid(trial).norm() < f0) {
                    x = trial;
                    break;
                }
                t *= 0.5;
            }
            if (t <= 1e-6) break;
        }
        if (!ok) continue;
        Macro root = unflatten<double>(x, M, K);
        auto close = [&](const Macro& a) { return frobenius_distance(a, root) < 1e-6; };
        if (std::any_of(found.begin(), found.end(), [&](const FixedPointReport& r) { return close(r.point); }))
            continue;
        FixedPointReport r;
        const auto k = std::find_if(known.begin(), known.end(), [&](const FixedPointReport& r) { return close(r.point); });
        if (k != known.end()) {
            r = *k;
        } else {
            r.point = root;
            r.kind = FixedPointKind::other;
            r.beta = beta;
            r.rho = rho;
            r.eta = eta;
            analyse(r);
        }
        found.push_back(std::move(r));
    }
    return found;
}

}  // namespace vaedyn
