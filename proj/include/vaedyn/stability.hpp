#pragma once

#include "vaedyn/macro_state.hpp"
#include "vaedyn/ode.hpp"

#include <complex>
#include <string>
#include <vector>

namespace vaedyn {

enum class ModelCase { matched, mismatched };
enum class FixedPointKind { collapsed, learnable, overfitting, other };
enum class Verdict { stable, marginal, unstable };

std::string to_string(ModelCase c);
std::string to_string(FixedPointKind k);
std::string to_string(Verdict v);
ModelCase model_case_from_string(const std::string& s);

/// Latent and factor counts of the two studied cases: (1, 1) and (2, 1).
inline int latent_dim(ModelCase c) { return c == ModelCase::matched ? 1 : 2; }
inline int factor_dim(ModelCase) { return 1; }

struct FixedPointReport {
    Macro point;
    FixedPointKind kind = FixedPointKind::other;
    /// Sign of the m overlap (+1 / -1); 0 for the collapsed point.
    int sign_branch = 0;
    /// Latent carrying the signal in the mismatched case (0-based); -1 otherwise.
    int signal_latent = -1;
    double beta = 0.0;
    double rho = 0.0;
    double eta = 0.0;
    /// Jacobian spectrum divided by the common learning rate.
    Eigen::VectorXcd eigenvalues;
    Verdict verdict = Verdict::unstable;

    double max_real() const { return eigenvalues.real().maxCoeff(); }
    std::string branch_label() const;
};

/// Parameters under which the closed-form analysis holds: lambda = 0, a common
/// learning rate equal to one (so eigenvalues read as lambda / tau), O(tau^2) terms dropped.
OdeParams stability_params(double rho, double eta, double tau = 1.0);

enum class JacobianMethod { complex_step, central };

struct JacobianOptions {
    /// complex_step: Im F(x + i h e_j) / h, exact to round-off since F is analytic in
    /// the state. central: Richardson-refined central differences with `step`.
    JacobianMethod method = JacobianMethod::complex_step;
    double step = 1e-6;
    bool richardson = true;
};

/// Jacobian of the flattened ode_rhs.
MatrixXd jacobian(const Macro& s, const OdeParams& p, double beta, const JacobianOptions& opt = {});

/// Jacobian of the system augmented with d beta / dt = gamma (1 - beta^2); beta is the last coordinate.
MatrixXd jacobian_annealed(const Macro& s, const OdeParams& p, double beta, double gamma,
                           const JacobianOptions& opt = {});

Eigen::VectorXcd spectrum(const MatrixXd& J);

/// stable: max Re < -tol; marginal: |max Re| <= tol; unstable otherwise.
Verdict classify(const Eigen::VectorXcd& eigenvalues, double tol = 1e-9);

std::vector<FixedPointReport> fixed_points_matched(double beta, double rho, double eta);
std::vector<FixedPointReport> fixed_points_mismatched(double beta, double rho, double eta);
std::vector<FixedPointReport> fixed_points(ModelCase c, double beta, double rho, double eta);

/// Fills eigenvalues and verdict of a report from the numeric Jacobian at its point.
void analyse(FixedPointReport& r, double tol = 1e-9);

/// beta above which the collapsed point is the only stable one: rho + eta.
double collapse_threshold(double rho, double eta);

/// Closed-form largest non-annealing eigenvalue at the learnable point with beta = 1,
/// rho = 2 - nu, eta = nu:
///   tau (sqrt5 - 3) / 2                          on (1 - 2 sqrt2 + sqrt5)/4 <= nu <= (1 + 2 sqrt2 + sqrt5)/4
///   -tau (2 nu + 1) + tau sqrt(4 nu (2 nu - 1) + 1)   otherwise.
double jmax(double nu, double tau);
/// Variant with sqrt(1 - 4 nu (1 - 4 nu)) in the outer branch. Kept for comparison; it
/// disagrees with the numeric spectrum.
double jmax_alternative(double nu, double tau);
/// Largest real part of the numeric Jacobian spectrum at the same point.
double jmax_numeric(double nu, double tau);
/// Annealing rate at or below which tanh annealing slows convergence: -jmax / 2.
double anneal_slowdown_threshold(double nu, double tau);

struct JmaxCheck {
    double formula = 0.0;
    double numeric = 0.0;
    double alternative = 0.0;
};
JmaxCheck jmax_verified(double nu, double tau);

/// Generalisation error of the stable fixed point family at beta (closed form).
double steady_state_eps(ModelCase c, double beta, double rho, double eta);

struct SweepRow {
    double beta = 0.0;
    FixedPointKind kind = FixedPointKind::other;
    double max_re_eig = 0.0;
    Verdict verdict = Verdict::unstable;
};

/// One row per fixed-point family present at each beta, represented by its + branch.
std::vector<SweepRow> stability_sweep(ModelCase c, double rho, double eta, const std::vector<double>& betas,
                                      double tol = 1e-9);

/// Damped Newton on ode_rhs from random starts. Roots that match a closed-form
/// family take its kind; the rest are labelled `other`.
std::vector<FixedPointReport> discover_fixed_points(ModelCase c, double beta, double rho, double eta, int starts,
                                                    Rng& rng);

}  // namespace vaedyn
