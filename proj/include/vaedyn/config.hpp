#pragma once

#include "vaedyn/io.hpp"
#include "vaedyn/ode.hpp"
#include "vaedyn/schedule.hpp"
#include "vaedyn/stability.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vaedyn {

enum class Scenario { fig1, fig2, fig3, supp_linear, rate_check, custom };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// Everything an experiment needs. Each field is one key of the run config; see
/// config_schema() for names, defaults and meaning.
struct ExperimentSpec {
    Scenario scenario = Scenario::custom;
    std::vector<ModelCase> cases{ModelCase::matched};
    /// 0 takes the latent / factor count from the case.
    int M = 0;
    int M_star = 0;
    std::vector<double> betas{1.0};
    std::vector<double> gammas{0.19};
    std::vector<int> Ns{500};
    int seeds = 1;
    std::uint64_t seed = 1;

    double rho = 1.0;
    double eta = 1.0;
    double lambda = 0.0;
    double tau_W = 0.01;
    double tau_V = 0.01;
    double tau_D = 0.01;
    bool small_rate_limit = false;
    bool d_drift_half_factor = true;
    RCrossTerm r_cross = RCrossTerm::derived;

    double dt = 0.0;
    double t_end = 1000.0;
    int record_points = 200;

    double init_scale = 0.1;
    double init_overlap = 0.1;

    ScheduleKind schedule = ScheduleKind::constant;
    double beta_cap = 1.0;
    double epsilon = 0.01;

    double delta = 1e-3;
    int jobs = 0;
    std::string output_dir = "vaedyn_out";

    bool operator==(const ExperimentSpec&) const = default;

    int latents(ModelCase c) const { return M > 0 ? M : latent_dim(c); }
    int factors(ModelCase c) const { return M_star > 0 ? M_star : factor_dim(c); }
    OdeParams ode_params(const BetaSchedule& schedule) const;
    BetaSchedule schedule_for(double beta, double gamma) const;
    void validate() const;
};

/// Preset defaults per scenario.
ExperimentSpec preset(Scenario s);

struct KeyDoc {
    std::string key;
    std::string type;
    std::string help;
};
const std::vector<KeyDoc>& config_schema();
/// Human-readable schema listing with the defaults of `base`.
std::string describe_schema(const ExperimentSpec& base);

/// Applies one key; unknown keys and malformed values throw ConfigError.
/// `tau` is accepted as shorthand for tau_W = tau_V = tau_D.
void apply_key(ExperimentSpec& spec, const std::string& key, const std::string& value);
void apply_key_values(ExperimentSpec& spec, const KeyValues& kv);

/// Canonical key=value form; apply_key_values on preset(spec.scenario) restores `spec` exactly.
KeyValues to_key_values(const ExperimentSpec& spec);

/// Lists: "a,b,c", "lin:start:stop:step" or "log:start:stop:count".
std::vector<double> parse_grid(const std::string& text, const std::string& key);

/// A parsed command line. Precedence, lowest first: scenario preset, config file,
/// --set overrides, dedicated flags (already folded into `overrides` in order).
struct Invocation {
    std::string subcommand;
    Scenario scenario = Scenario::custom;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    int verbosity = 0;

    bool operator==(const Invocation&) const = default;
};

ExperimentSpec resolve(const Invocation& inv);

/// Manifest: the resolved spec plus `subcommand` and `verbosity`.
KeyValues manifest_for(const Invocation& inv, const ExperimentSpec& resolved);
/// Inverse of manifest_for: an Invocation whose overrides are the full resolved spec.
Invocation invocation_from_manifest(const KeyValues& manifest);

/// Default output root: $VAEDYN_OUTPUT_ROOT if set, else ./vaedyn_out.
std::string default_output_root();

}  // namespace vaedyn
