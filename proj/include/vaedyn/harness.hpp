#pragma once

#include "vaedyn/config.hpp"
#include "vaedyn/integrate.hpp"
#include "vaedyn/micro.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vaedyn {

/// Runs body(0..n-1) on at most `jobs` threads (0: hardware concurrency). If any job
/// throws, the exception of the lowest failing index is rethrown after all jobs finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

/// Independent generator for one (grid point, seed) job.
Rng job_rng(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

/// One-pass SGD from `s`, t_end * N steps, beta(t) from the schedule at t = step / N.
/// Records measure_macro at the same times as `integrate` with equal t_end and record_points.
Trajectory simulate_sgd(const GenerativeConfig& cfg, MicroState s, const BetaSchedule& schedule, double t_end,
                        int record_points, Rng& rng);

/// Teacher, planted start and the generator that then draws the samples, for run
/// `seed_index` at (case, N). A run is a pure function of these coordinates and spec.seed.
struct SgdSetup {
    Rng rng;
    GenerativeConfig cfg;
    MicroState state;
};
SgdSetup make_sgd_setup(const ExperimentSpec& spec, ModelCase c, int N, int seed_index, const BetaSchedule& sched);

Macro initial_macro(const ExperimentSpec& spec, ModelCase c);
InitOptions init_options(const ExperimentSpec& spec);
IntegrateOptions integrate_options(const ExperimentSpec& spec);

/// "beta=0.5" style file stem from (name, value) pairs.
std::string param_tuple(const std::vector<std::pair<std::string, double>>& params);
fs::path scenario_dir(const ExperimentSpec& spec, const std::string& scenario, ModelCase c);

struct RunContext {
    int verbosity = 0;
    /// Skip writing files (tests and the acceptance binary).
    bool write = true;
    void log(const std::string& msg) const;
};

struct Fig1Panel {
    ModelCase model_case = ModelCase::matched;
    double beta = 0.0;
    Trajectory ode;
    std::vector<Trajectory> sgd;
};
struct Fig1Result {
    std::vector<Fig1Panel> panels;
    std::vector<fs::path> files;
};
/// Per (case, beta): ODE trajectory, one SGD trajectory per seed, and a summary CSV
///   t,ode_<obs>,sgd_<obs>_mean,sgd_<obs>_std,...  for obs in eps_g, m_i_1, Q_i_i, E_1_2.
Fig1Result run_fig1(const ExperimentSpec& spec, const RunContext& ctx = {});

struct Fig2Row {
    ModelCase model_case = ModelCase::matched;
    double beta = 0.0;
    double closed_form = 0.0;
    double integrated = 0.0;
    /// beta = eta (mismatched) or beta = rho + eta: algebraic convergence only.
    bool marginal = false;
};
struct Fig2Result {
    std::vector<Fig2Row> rows;
    std::vector<fs::path> files;
};
/// CSV per case: beta,closed_form,integrated,abs_diff,marginal.
Fig2Result run_fig2(const ExperimentSpec& spec, const RunContext& ctx = {});

struct ConvergenceRow {
    double gamma = 0.0;
    std::optional<double> time;
};
struct AnnealSweep {
    ScheduleKind kind = ScheduleKind::tanh;
    std::vector<ConvergenceRow> rows;
    /// Grid optimum; nullopt when no run converged.
    std::optional<std::size_t> best;
};
struct AnnealResult {
    double eps_star = 0.0;
    std::optional<double> constant_time;
    double jmax = 0.0;
    double jmax_numeric = 0.0;
    double threshold = 0.0;
    std::vector<AnnealSweep> sweeps;
    std::vector<fs::path> files;
};
/// Convergence-time sweep over spec.gammas for each schedule kind, against constant beta = spec.betas[0].
AnnealResult anneal_sweep(const ExperimentSpec& spec, ModelCase c, const std::vector<ScheduleKind>& kinds,
                          const std::string& scenario, const RunContext& ctx = {});

/// tanh sweep plus the constant-beta and optimal-gamma trajectories.
AnnealResult run_fig3(const ExperimentSpec& spec, const RunContext& ctx = {});

struct SuppLinearResult {
    AnnealResult sweep;
    /// Max relative gap between the two curves after rescaling gamma so their optima coincide.
    double similarity_gap = 0.0;
    /// Final eps_g of an uncapped linear ramp at the largest gamma.
    double uncapped_final_eps = 0.0;
};
SuppLinearResult run_supp_linear(const ExperimentSpec& spec, const RunContext& ctx = {});

struct RateRow {
    int N = 0;
    std::vector<double> deviations;
    double mean = 0.0;
    double std = 0.0;
};
struct RateResult {
    std::vector<RateRow> rows;
    double slope = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<fs::path> files;
};
/// Max over recorded t of the Frobenius distance between SGD and ODE macro states, per
/// (N, seed); slope of log mean deviation against log N with a 95% interval.
RateResult run_rate_check(const ExperimentSpec& spec, const RunContext& ctx = {});

/// Least-squares slope of y on x with its standard error.
std::pair<double, double> ols_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace vaedyn
