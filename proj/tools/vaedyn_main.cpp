// Command-line front end: every subcommand resolves an ExperimentSpec, runs the
// harness and writes its files plus a manifest under <output_dir>/<folder>/.

#include "vaedyn/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace vaedyn;

namespace {

const char* kSchemas = R"(Output schemas (all numbers full double precision):
  trajectory CSV   t,beta,eps_g,m_<i>_<l>...,d_<i>_<l>...,Q_<i>_<j>...(i<=j),E_<i>_<j>...(i<=j),R_<i>_<j>...,D_<i>...
                   indices 1-based; m, d, R row-major; Q, E upper triangle, i outer.
  fixed-point JSON array of {kind, branch, beta, rho, eta, M, M_star, eps_g, labels, point, eigenvalues: [[re, im]...],
                   max_re_eig, verdict}; point follows the trajectory column order after eps_g.
  sweep CSV        beta,kind,max_re_eig,verdict
  fig1 summary     t,ode_<obs>,sgd_<obs>_mean,sgd_<obs>_std for obs in eps_g, m_i_1, Q_i_i, E_1_2
  fig2 CSV         beta,closed_form,integrated,abs_diff,marginal
  convergence CSV  gamma,convergence_time,converged,below_threshold (time is nan when not converged)
  threshold CSV    beta,eps_star,delta,jmax,jmax_numeric,threshold,constant_time,constant_converged
  rate CSVs        deviation.csv N,seed,max_frobenius_deviation; summary.csv N,mean,std,seeds;
                   slope.csv slope,slope_se,ci95_low,ci95_high
  manifest.txt     key=value lines: the resolved config plus subcommand and verbosity; feed it back with --config.
Precedence (lowest first): scenario preset, --config file, --set KEY=VALUE in order, dedicated flags.
Environment: VAEDYN_OUTPUT_ROOT sets the default output_dir.
Exit status: 0 ok, 2 bad config or usage, 3 numerical failure, 1 other errors.
)";

struct CommonFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::string> output, case_name, beta, gamma, N, schedule;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs, seeds;
    std::optional<double> rho, eta, tau, t_end;
    int verbosity = 0;
};

void add_common(CLI::App* sub, CommonFlags& f, Scenario scenario, const std::string& extra_help) {
    sub->add_option("-c,--config", f.config, "key=value config file");
    sub->add_option("--set", f.sets, "override KEY=VALUE (repeatable)");
    sub->add_option("-o,--output", f.output, "output root (output_dir)");
    sub->add_option("--seed", f.seed, "base seed");
    sub->add_option("-j,--jobs", f.jobs, "worker threads (0: all cores)");
    sub->add_option("--case", f.case_name, "matched | mismatched | both");
    sub->add_option("--beta", f.beta, "beta grid");
    sub->add_option("--gamma", f.gamma, "gamma grid");
    sub->add_option("--N", f.N, "N grid");
    sub->add_option("--seeds", f.seeds, "runs per grid point");
    sub->add_option("--rho", f.rho, "signal strength");
    sub->add_option("--eta", f.eta, "noise strength");
    sub->add_option("--tau", f.tau, "common learning rate");
    sub->add_option("--t-end", f.t_end, "horizon in rescaled time");
    sub->add_option("--schedule", f.schedule, "constant | step | linear | tanh");
    sub->add_flag("-v,--verbose", f.verbosity, "progress on stderr (repeat for more)");
    sub->footer(extra_help + "\n" + describe_schema(preset(scenario)) + "\n" + kSchemas);
}

Invocation make_invocation(const std::string& name, Scenario scenario, const CommonFlags& f,
                           const std::vector<std::pair<std::string, std::string>>& pre = {}) {
    Invocation inv;
    inv.subcommand = name;
    inv.scenario = scenario;
    inv.config_path = f.config;
    inv.verbosity = f.verbosity;
    inv.overrides = pre;
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        inv.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto put = [&](const char* key, const auto& opt) {
        if (!opt) return;
        if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) inv.overrides.emplace_back(key, *opt);
        else if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, double>) inv.overrides.emplace_back(key, format_double(*opt));
        else inv.overrides.emplace_back(key, std::to_string(*opt));
    };
    put("output_dir", f.output);
    put("seed", f.seed);
    put("jobs", f.jobs);
    put("case", f.case_name);
    put("beta", f.beta);
    put("gamma", f.gamma);
    put("N", f.N);
    put("seeds", f.seeds);
    put("rho", f.rho);
    put("eta", f.eta);
    put("tau", f.tau);
    put("t_end", f.t_end);
    put("schedule", f.schedule);
    return inv;
}

fs::path write_manifest(const Invocation& inv, const ExperimentSpec& spec, const std::string& folder) {
    const fs::path p = fs::path(spec.output_dir) / folder / "manifest.txt";
    write_key_values(p, manifest_for(inv, spec));
    return p;
}

void report(const std::vector<fs::path>& files, const fs::path& manifest) {
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
    std::cout << "wrote " << manifest.string() << "\n";
}

std::string opt_time(const std::optional<double>& t) { return t ? format_double(*t) : std::string("none"); }

// -- subcommands -------------------------------------------------------------

void cmd_simulate(const Invocation& inv) {
    const ExperimentSpec spec = resolve(inv);
    const RunContext ctx{inv.verbosity, true};
    const bool annealed = spec.schedule == ScheduleKind::tanh || spec.schedule == ScheduleKind::linear;
    const std::vector<double>& grid = annealed ? spec.gammas : spec.betas;
    struct Job {
        ModelCase c;
        double x;
        int N, seed;
    };
    std::vector<Job> jobs;
    for (ModelCase c : spec.cases)
        for (double x : grid)
            for (int N : spec.Ns)
                for (int s = 0; s < spec.seeds; ++s) jobs.push_back({c, x, N, s});
    std::vector<fs::path> files(jobs.size());
    parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
        const Job& j = jobs[i];
        const BetaSchedule sched = spec.schedule_for(j.x, j.x);
        const std::string key = annealed ? "gamma" : "beta";
        const std::string stem = param_tuple({{key, j.x}, {"N", double(j.N)}, {"seed", double(j.seed)}});
        try {
            SgdSetup su = make_sgd_setup(spec, j.c, j.N, j.seed, sched);
            const Trajectory tr = simulate_sgd(su.cfg, std::move(su.state), sched, spec.t_end, spec.record_points, su.rng);
            files[i] = scenario_dir(spec, "simulate_sgd", j.c) / (stem + ".csv");
            write_trajectory_csv(files[i], tr);
        } catch (const NumericalError& e) {
            throw NumericalError("simulate_sgd case=" + to_string(j.c) + " " + stem + ": " + e.what());
        }
        ctx.log("simulate_sgd " + stem + " done");
    });
    report(files, write_manifest(inv, spec, "simulate_sgd"));
}

void cmd_integrate(Invocation inv, const std::string& init_path, std::size_t init_index, bool doubling) {
    std::optional<LoadedPoint> start;
    if (!init_path.empty()) {
        start = read_fixed_point_json(init_path, init_index);
        const std::vector<std::pair<std::string, std::string>> from_file{
            {"case", start->point.M() == 1 ? "matched" : "mismatched"},
            {"M", std::to_string(start->point.M())},
            {"M_star", std::to_string(start->point.M_star())},
            {"beta", format_double(start->beta)},
            {"rho", format_double(start->rho)},
            {"eta", format_double(start->eta)}};
        inv.overrides.insert(inv.overrides.begin(), from_file.begin(), from_file.end());
    }
    const ExperimentSpec spec = resolve(inv);
    const bool annealed = spec.schedule == ScheduleKind::tanh || spec.schedule == ScheduleKind::linear;
    const std::vector<double>& grid = annealed ? spec.gammas : spec.betas;
    std::vector<std::pair<ModelCase, double>> jobs;
    for (ModelCase c : spec.cases)
        for (double x : grid) jobs.emplace_back(c, x);
    std::vector<fs::path> files(jobs.size());
    std::vector<double> doubling_err(jobs.size(), -1.0);
    parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
        const auto [c, x] = jobs[i];
        const std::string stem = param_tuple({{annealed ? "gamma" : "beta", x}});
        try {
            IntegrateOptions o = integrate_options(spec);
            o.step_doubling_check = doubling;
            const Macro M0 = start ? start->point : initial_macro(spec, c);
            const Trajectory tr = integrate(M0, spec.ode_params(spec.schedule_for(x, x)), o);
            doubling_err[i] = tr.doubling_error;
            files[i] = scenario_dir(spec, "integrate_ode", c) / (stem + ".csv");
            write_trajectory_csv(files[i], tr);
        } catch (const NumericalError& e) {
            throw NumericalError("integrate_ode case=" + to_string(c) + " " + stem + ": " + e.what());
        }
    });
    if (doubling)
        for (std::size_t i = 0; i < jobs.size(); ++i)
            std::cout << "step_doubling case=" << to_string(jobs[i].first) << " x=" << format_double(jobs[i].second)
                      << " max_change=" << format_double(doubling_err[i]) << "\n";
    report(files, write_manifest(inv, spec, "integrate_ode"));
}

void cmd_fixed_points(const Invocation& inv, int discover) {
    const ExperimentSpec spec = resolve(inv);
    std::vector<fs::path> files;
    std::vector<FixedPointReport> all;
    for (ModelCase c : spec.cases)
        for (double b : spec.betas) {
            auto pts = fixed_points(c, b, spec.rho, spec.eta);
            if (discover > 0) {
                Rng rng = job_rng(spec.seed, {std::uint64_t(c == ModelCase::matched ? 0 : 1)});
                for (auto& r : discover_fixed_points(c, b, spec.rho, spec.eta, discover, rng))
                    if (r.kind == FixedPointKind::other) pts.push_back(std::move(r));
            }
            files.push_back(scenario_dir(spec, "fixed_points", c) /
                            (param_tuple({{"beta", b}, {"rho", spec.rho}, {"eta", spec.eta}}) + ".json"));
            write_fixed_points_json(files.back(), pts);
            all.insert(all.end(), pts.begin(), pts.end());
        }
    std::cout << fixed_points_json(all);
    const fs::path m = write_manifest(inv, spec, "fixed_points");
    if (inv.verbosity > 0) report(files, m);
}

void cmd_sweep(const Invocation& inv) {
    const ExperimentSpec spec = resolve(inv);
    std::vector<fs::path> files;
    for (ModelCase c : spec.cases) {
        const auto rows = stability_sweep(c, spec.rho, spec.eta, spec.betas);
        files.push_back(scenario_dir(spec, "stability_sweep", c) /
                        (param_tuple({{"rho", spec.rho}, {"eta", spec.eta}}) + ".csv"));
        write_sweep_csv(files.back(), rows);
    }
    report(files, write_manifest(inv, spec, "stability_sweep"));
}

void print_anneal(const AnnealResult& r) {
    std::cout << "jmax=" << format_double(r.jmax) << " jmax_numeric=" << format_double(r.jmax_numeric)
              << " threshold=" << format_double(r.threshold) << " constant_time=" << opt_time(r.constant_time) << "\n";
    for (const auto& s : r.sweeps)
        if (s.best)
            std::cout << "schedule=" << to_string(s.kind) << " best_gamma=" << format_double(s.rows[*s.best].gamma)
                      << " best_time=" << format_double(*s.rows[*s.best].time) << "\n";
}

void cmd_anneal(const Invocation& inv) {
    const ExperimentSpec spec = resolve(inv);
    const RunContext ctx{inv.verbosity, true};
    require(spec.schedule == ScheduleKind::tanh || spec.schedule == ScheduleKind::linear,
            "anneal-sweep: schedule must be tanh or linear");
    std::vector<fs::path> files;
    for (ModelCase c : spec.cases) {
        const AnnealResult r = anneal_sweep(spec, c, {spec.schedule}, "anneal_sweep", ctx);
        print_anneal(r);
        files.insert(files.end(), r.files.begin(), r.files.end());
    }
    report(files, write_manifest(inv, spec, "anneal_sweep"));
}

void print_rate(const RateResult& r) {
    for (const auto& row : r.rows)
        std::cout << "N=" << row.N << " mean_max_deviation=" << format_double(row.mean)
                  << " std=" << format_double(row.std) << "\n";
    std::cout << "slope=" << format_double(r.slope) << " ci95=[" << format_double(r.ci_low) << ","
              << format_double(r.ci_high) << "]\n";
}

void cmd_rate(const Invocation& inv) {
    const ExperimentSpec spec = resolve(inv);
    const RateResult r = run_rate_check(spec, {inv.verbosity, true});
    print_rate(r);
    report(r.files, write_manifest(inv, spec, "rate_check"));
}

void cmd_reproduce(Invocation inv, const std::string& which) {
    inv.scenario = scenario_from_string(which);
    const ExperimentSpec spec = resolve(inv);
    const RunContext ctx{inv.verbosity, true};
    std::vector<fs::path> files;
    switch (inv.scenario) {
        case Scenario::fig1: files = run_fig1(spec, ctx).files; break;
        case Scenario::fig2: {
            const Fig2Result r = run_fig2(spec, ctx);
            double worst = 0.0;
            for (const auto& row : r.rows)
                if (!row.marginal) worst = std::max(worst, std::abs(row.integrated - row.closed_form));
            std::cout << "max_abs_diff_nonmarginal=" << format_double(worst) << "\n";
            files = r.files;
            break;
        }
        case Scenario::fig3: {
            const AnnealResult r = run_fig3(spec, ctx);
            print_anneal(r);
            files = r.files;
            break;
        }
        case Scenario::supp_linear: {
            const SuppLinearResult r = run_supp_linear(spec, ctx);
            print_anneal(r.sweep);
            std::cout << "similarity_gap=" << format_double(r.similarity_gap)
                      << " uncapped_final_eps_g=" << format_double(r.uncapped_final_eps) << "\n";
            files = r.sweep.files;
            break;
        }
        case Scenario::rate_check: {
            const RateResult r = run_rate_check(spec, ctx);
            print_rate(r);
            files = r.files;
            break;
        }
        case Scenario::custom: throw ConfigError("reproduce: choose fig1, fig2, fig3 or supp-linear");
    }
    report(files, write_manifest(inv, spec, to_string(inv.scenario)));
}

std::string one_line(std::string s) {
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vaedyn: learning dynamics of linear VAEs (SGD, macroscopic ODE, fixed points, KL annealing)"};
    app.require_subcommand(1);
    app.footer(kSchemas);

    CommonFlags f_sim, f_int, f_fp, f_sw, f_an, f_rate, f_rep;
    auto* sim = app.add_subcommand("simulate-sgd", "one-pass SGD runs; one trajectory CSV per (case, beta|gamma, N, seed)");
    add_common(sim, f_sim, Scenario::custom, "Files: simulate_sgd/<case>/beta=..,N=..,seed=...csv (gamma=.. for tanh/linear).");

    std::string init_path;
    std::size_t init_index = 0;
    bool doubling = false;
    auto* integ = app.add_subcommand("integrate-ode", "RK4 integration of the macroscopic ODE");
    add_common(integ, f_int, Scenario::custom,
               "Files: integrate_ode/<case>/beta=...csv. --init takes beta, rho, eta, M and M_star from the JSON; "
               "flags still override. A fixed point stays constant when small_rate_limit=true.");
    integ->add_option("--init", init_path, "start from a point of a fixed-points JSON report");
    integ->add_option("--init-index", init_index, "index into the --init report")->capture_default_str();
    integ->add_flag("--step-doubling", doubling, "rerun at dt/2 and print the largest change");

    int discover = 0;
    auto* fp = app.add_subcommand("fixed-points", "closed-form fixed points with numeric spectra (JSON on stdout)");
    add_common(fp, f_fp, Scenario::custom, "Files: fixed_points/<case>/beta=..,rho=..,eta=...json.");
    fp->add_option("--discover", discover, "extra damped-Newton starts; new roots are labelled other")->capture_default_str();

    auto* sw = app.add_subcommand("stability-sweep", "max real eigenvalue and verdict per family over the beta grid");
    add_common(sw, f_sw, Scenario::custom, "Files: stability_sweep/<case>/rho=..,eta=...csv.");

    auto* an = app.add_subcommand("anneal-sweep", "convergence time versus annealing rate against constant beta");
    add_common(an, f_an, Scenario::fig3, "Files: anneal_sweep/<case>/convergence,schedule=<kind>.csv and threshold.csv.");

    auto* rate = app.add_subcommand("verify-rate", "SGD versus ODE deviation over the N grid (1/sqrt(N) check)");
    add_common(rate, f_rate, Scenario::rate_check, "Files: rate_check/<case>/deviation.csv, summary.csv, slope.csv.");

    std::string which;
    auto* rep = app.add_subcommand("reproduce", "regenerate the data behind a figure: fig1 | fig2 | fig3 | supp-linear");
    rep->add_option("figure", which, "fig1 | fig2 | fig3 | supp-linear")
        ->required()
        ->check(CLI::IsMember({"fig1", "fig2", "fig3", "supp-linear", "supp_linear"}));
    add_common(rep, f_rep, Scenario::custom,
               "Defaults below are the custom preset; each figure starts from its own preset:\n"
               "  fig1: both cases, beta 0.2,0.5,1,1.5,2,2.5, N=500, 5 seeds, tau=0.01, t_end=3000\n"
               "  fig2: both cases, beta lin:0.1:3:0.1, tau=1, small_rate_limit, t_end=3000\n"
               "  fig3 / supp-linear: matched, gamma log:0.01:10:61, tau=1, small_rate_limit, t_end=400, 40001 records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error kind=usage message=\"" << one_line(e.what()) << "\"\n";
        return 2;
    }

    try {
        if (sim->parsed()) cmd_simulate(make_invocation("simulate-sgd", Scenario::custom, f_sim));
        else if (integ->parsed()) cmd_integrate(make_invocation("integrate-ode", Scenario::custom, f_int), init_path, init_index, doubling);
        else if (fp->parsed()) cmd_fixed_points(make_invocation("fixed-points", Scenario::custom, f_fp), discover);
        else if (sw->parsed()) cmd_sweep(make_invocation("stability-sweep", Scenario::custom, f_sw));
        else if (an->parsed()) cmd_anneal(make_invocation("anneal-sweep", Scenario::fig3, f_an));
        else if (rate->parsed()) cmd_rate(make_invocation("verify-rate", Scenario::rate_check, f_rate));
        else if (rep->parsed()) cmd_reproduce(make_invocation("reproduce", Scenario::custom, f_rep), which);
    } catch (const ConfigError& e) {
        std::cerr << "error kind=config message=\"" << one_line(e.what()) << "\"\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error kind=numerical message=\"" << one_line(e.what()) << "\"\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal message=\"" << one_line(e.what()) << "\"\n";
        return 1;
    }
    return 0;
}
