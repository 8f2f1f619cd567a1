#pragma once

#include "vaedyn/macro_state.hpp"
#include "vaedyn/ode.hpp"

#include <optional>
#include <vector>

namespace vaedyn {

struct Trajectory {
    std::vector<double> times;
    std::vector<Macro> states;
    std::vector<double> eps_g;
    std::vector<double> beta;
    /// Largest change of any recorded observable when dt is halved (step-doubling
    /// check); negative when the check was not requested.
    double doubling_error = -1.0;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    void validate() const;
};

struct IntegrateOptions {
    double t_end = 100.0;
    /// Zero selects default_dt.
    double dt = 0.0;
    /// Number of evenly spaced records including t = 0 and t = t_end.
    int record_points = 200;
    bool step_doubling_check = false;
};

/// 0.02 / tau_max, tightened to 0.02 / gamma for fast tanh schedules.
double default_dt(const OdeParams& p);

/// Classical RK4 on (MacroState, beta). For the tanh schedule beta is carried as a
/// state with d beta / dt = gamma (1 - beta^2); other schedules are evaluated in time.
/// Throws NumericalError when D crosses zero or values become non-finite.
Trajectory integrate(const Macro& M0, const OdeParams& params, const IntegrateOptions& opts);

/// First recorded time after which eps_g stays within eps_star + delta; nullopt if never.
std::optional<double> convergence_time(const Trajectory& traj, double eps_star, double delta);

}  // namespace vaedyn
