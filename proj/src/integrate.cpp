#include "vaedyn/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vaedyn {

void OdeParams::validate() const {
    require(rho >= 0.0 && eta >= 0.0, "ode: rho and eta must be nonnegative");
    require(lambda >= 0.0, "ode: lambda must be nonnegative");
    require(tau_W > 0.0 && tau_V > 0.0 && tau_D > 0.0, "ode: learning rates must be positive");
    schedule.validate();
}

void Trajectory::validate() const {
    require(times.size() == states.size() && times.size() == eps_g.size() && times.size() == beta.size(),
            "trajectory: sequences differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "trajectory: times must be strictly increasing");
}

double default_dt(const OdeParams& p) {
    double dt = 0.02 / p.tau_max();
    // the tanh schedule's own relaxation rate is 2 gamma beta
    if (p.schedule.kind == ScheduleKind::tanh && p.schedule.gamma > 0.0) dt = std::min(dt, 0.02 / p.schedule.gamma);
    return dt;
}

namespace {

struct Stepper {
    const OdeParams& p;
    int M, K;
    int n;  // flat macro size

    VectorXd rhs(const VectorXd& z, double t) const {
        const Macro s = unflatten<double>(z.head(n), M, K);
        const double beta = p.schedule.evolves_as_state() ? z[n] : beta_at(p.schedule, t);
        VectorXd out(n + 1);
        out.head(n) = flatten(ode_rhs(s, p, beta));
        out[n] = p.schedule.evolves_as_state() ? p.schedule.derivative(z[n]) : 0.0;
        return out;
    }

    void step(VectorXd& z, double t, double h) const {
        const VectorXd k1 = rhs(z, t);
        const VectorXd k2 = rhs(z + 0.5 * h * k1, t + 0.5 * h);
        const VectorXd k3 = rhs(z + 0.5 * h * k2, t + 0.5 * h);
        const VectorXd k4 = rhs(z + h * k3, t + h);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

Trajectory run(const Macro& M0, const OdeParams& p, const IntegrateOptions& o, double dt) {
    const int M = M0.M(), K = M0.M_star();
    const int n = flat_size(M, K);
    Stepper st{p, M, K, n};
    VectorXd z(n + 1);
    z.head(n) = flatten(M0);
    z[n] = p.schedule.evolves_as_state() ? beta_at(p.schedule, 0.0) : 0.0;

    const int intervals = o.record_points - 1;
    const double span = o.t_end / intervals;
    const long substeps = std::max<long>(1, long(std::ceil(span / dt - 1e-9)));
    const double h = span / double(substeps);

    Trajectory tr;
    tr.times.reserve(o.record_points);
    auto record = [&](double t) {
        Macro s = unflatten<double>(z.head(n), M, K);
        check_macro(s);
        const double beta = p.schedule.evolves_as_state() ? z[n] : beta_at(p.schedule, t);
        tr.times.push_back(t);
        tr.eps_g.push_back(generalization_error(s, p.rho));
        tr.beta.push_back(beta);
        tr.states.push_back(std::move(s));
    };
    record(0.0);
    for (int r = 1; r <= intervals; ++r) {
        const double t0 = span * (r - 1);
        for (long k = 0; k < substeps; ++k) {
            st.step(z, t0 + double(k) * h, h);
            if (!z.allFinite()) {
                std::ostringstream msg;
                msg << "integrate: non-finite state at t=" << t0 + double(k + 1) * h;
                throw NumericalError(msg.str());
            }
            for (int i = 0; i < M; ++i) {
                if (!(z[n - M + i] > 0.0)) {
                    std::ostringstream msg;
                    msg << "integrate: D_" << i + 1 << " crossed zero at t=" << t0 + double(k + 1) * h
                        << " (dt=" << h << " too large or beta=0)";
                    throw NumericalError(msg.str());
                }
            }
        }
        record(span * r);
    }
    return tr;
}

double max_observable_change(const Trajectory& a, const Trajectory& b) {
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        err = std::max(err, (flatten(a.states[i]) - flatten(b.states[i])).cwiseAbs().maxCoeff());
        err = std::max(err, std::abs(a.eps_g[i] - b.eps_g[i]));
        err = std::max(err, std::abs(a.beta[i] - b.beta[i]));
    }
    return err;
}

}  // namespace

Trajectory integrate(const Macro& M0, const OdeParams& params, const IntegrateOptions& opts) {
    params.validate();
    require(opts.t_end > 0.0, "integrate: t_end must be positive");
    require(opts.record_points >= 2, "integrate: need at least two record points");
    require(opts.dt >= 0.0, "integrate: dt must be positive");
    require(M0.m.rows() == M0.Q.rows() && M0.D.size() == M0.Q.rows(), "integrate: inconsistent initial state");
    check_macro(M0, 1e-12);
    const double dt = opts.dt > 0.0 ? opts.dt : default_dt(params);
    Trajectory tr = run(M0, params, opts, dt);
    if (opts.step_doubling_check) tr.doubling_error = max_observable_change(tr, run(M0, params, opts, 0.5 * dt));
    return tr;
}

std::optional<double> convergence_time(const Trajectory& traj, double eps_star, double delta) {
    require(!traj.empty(), "convergence_time: empty trajectory");
    require(delta > 0.0, "convergence_time: delta must be positive");
    const double level = eps_star + delta;
    std::optional<double> first;
    for (std::size_t i = traj.size(); i-- > 0;) {
        if (traj.eps_g[i] > level) break;
        first = traj.times[i];
    }
    return first;
}

}  // namespace vaedyn
