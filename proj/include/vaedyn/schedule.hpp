#pragma once

#include <limits>
#include <string>

namespace vaedyn {

enum class ScheduleKind { constant, step, linear, tanh };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

/// Time-dependent KL weight beta(t), t in rescaled time.
///   constant: beta0
///   step:     min(beta0 + epsilon * floor(t * steps_per_unit), beta_cap)
///   linear:   min(gamma * t, beta_cap)
///   tanh:     tanh(gamma * t), i.e. d beta / dt = gamma (1 - beta^2), beta(0) = 0
struct BetaSchedule {
    ScheduleKind kind = ScheduleKind::constant;
    double beta0 = 1.0;
    double gamma = 0.0;
    double epsilon = 0.0;
    double beta_cap = 1.0;
    /// Discrete steps per unit of rescaled time for the step schedule (N for SGD).
    double steps_per_unit = 1.0;

    static BetaSchedule constant(double beta);
    static BetaSchedule tanh(double gamma);
    static BetaSchedule linear(double gamma, double cap = 1.0);
    static BetaSchedule step(double beta0, double epsilon, double cap = 1.0, double steps_per_unit = 1.0);

    /// Rate of change used when beta is carried as an ODE state (tanh only).
    double derivative(double beta) const { return gamma * (1.0 - beta * beta); }
    bool evolves_as_state() const { return kind == ScheduleKind::tanh; }

    void validate() const;
};

double beta_at(const BetaSchedule& s, double t);

}  // namespace vaedyn
