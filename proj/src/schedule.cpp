#include "vaedyn/schedule.hpp"

#include "vaedyn/common.hpp"

#include <algorithm>
#include <cmath>

namespace vaedyn {

std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::step: return "step";
        case ScheduleKind::linear: return "linear";
        case ScheduleKind::tanh: return "tanh";
    }
    return "constant";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "constant") return ScheduleKind::constant;
    if (s == "step") return ScheduleKind::step;
    if (s == "linear") return ScheduleKind::linear;
    if (s == "tanh") return ScheduleKind::tanh;
    throw ConfigError("schedule: unknown kind '" + s + "'");
}

BetaSchedule BetaSchedule::constant(double beta) {
    BetaSchedule s;
    s.kind = ScheduleKind::constant;
    s.beta0 = beta;
    return s;
}

BetaSchedule BetaSchedule::tanh(double gamma) {
    BetaSchedule s;
    s.kind = ScheduleKind::tanh;
    s.beta0 = 0.0;
    s.gamma = gamma;
    return s;
}

BetaSchedule BetaSchedule::linear(double gamma, double cap) {
    BetaSchedule s;
    s.kind = ScheduleKind::linear;
    s.beta0 = 0.0;
    s.gamma = gamma;
    s.beta_cap = cap;
    return s;
}

BetaSchedule BetaSchedule::step(double beta0, double epsilon, double cap, double steps_per_unit) {
    BetaSchedule s;
    s.kind = ScheduleKind::step;
    s.beta0 = beta0;
    s.epsilon = epsilon;
    s.beta_cap = cap;
    s.steps_per_unit = steps_per_unit;
    return s;
}

void BetaSchedule::validate() const {
    require(beta0 >= 0.0, "schedule: beta0 must be nonnegative");
    require(gamma >= 0.0, "schedule: gamma must be nonnegative");
    require(epsilon >= 0.0, "schedule: epsilon must be nonnegative");
    require(beta_cap >= 0.0, "schedule: beta_cap must be nonnegative");
    require(steps_per_unit > 0.0, "schedule: steps_per_unit must be positive");
    if (kind == ScheduleKind::tanh || kind == ScheduleKind::linear)
        require(gamma > 0.0, "schedule: annealing rate gamma must be positive");
}

double beta_at(const BetaSchedule& s, double t) {
    switch (s.kind) {
        case ScheduleKind::constant: return s.beta0;
        case ScheduleKind::tanh: return std::tanh(s.gamma * t);
        case ScheduleKind::linear: return std::min(s.gamma * t, s.beta_cap);
        case ScheduleKind::step: {
            // tiny slack so t = k / steps_per_unit lands on step k despite rounding
            const double steps = std::floor(t * s.steps_per_unit + 1e-9);
            return std::min(s.beta0 + s.epsilon * steps, s.beta_cap);
        }
    }
    return s.beta0;
}

}  // namespace vaedyn
