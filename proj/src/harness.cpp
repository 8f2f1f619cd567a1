#include "vaedyn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace vaedyn {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = jobs > 0 ? std::size_t(jobs) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Rng job_rng(std::uint64_t base, std::initializer_list<std::uint64_t> coords) {
    std::vector<std::uint32_t> words{std::uint32_t(base), std::uint32_t(base >> 32)};
    for (auto c : coords) {
        words.push_back(std::uint32_t(c));
        words.push_back(std::uint32_t(c >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

void RunContext::log(const std::string& msg) const {
    if (verbosity <= 0) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << msg << '\n';
}

namespace {

/// Re-throws numerical failures with the grid point prepended.
template <typename F>
void with_context(const std::string& where, F&& f) {
    try {
        f();
    } catch (const NumericalError& e) {
        throw NumericalError(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
}

/// Two-sided 97.5% Student t quantile (Cornish-Fisher expansion around the normal).
double t_quantile_975(double dof) {
    const double z = 1.959963984540054;
    const double z3 = z * z * z, z5 = z3 * z * z, z7 = z5 * z * z;
    return z + (z3 + z) / (4 * dof) + (5 * z5 + 16 * z3 + 3 * z) / (96 * dof * dof) +
           (3 * z7 + 19 * z5 + 17 * z3 - 15 * z) / (384 * dof * dof * dof);
}

double observable(const Trajectory& tr, std::size_t k, const std::string& name) {
    if (name == "eps_g") return tr.eps_g[k];
    const Macro& s = tr.states[k];
    const int i = name[2] - '1', j = name[4] - '1';
    switch (name[0]) {
        case 'm': return s.m(i, j);
        case 'Q': return s.Q(i, j);
        case 'E': return s.E(i, j);
    }
    throw ConfigError("unknown observable " + name);
}

}  // namespace

InitOptions init_options(const ExperimentSpec& spec) {
    InitOptions o;
    o.scale = spec.init_scale;
    o.overlap = spec.init_overlap;
    return o;
}

Macro initial_macro(const ExperimentSpec& spec, ModelCase c) {
    return expected_initial_macro(spec.latents(c), spec.factors(c), init_options(spec));
}

IntegrateOptions integrate_options(const ExperimentSpec& spec) {
    IntegrateOptions o;
    o.t_end = spec.t_end;
    o.dt = spec.dt;
    o.record_points = spec.record_points;
    return o;
}

std::string param_tuple(const std::vector<std::pair<std::string, double>>& params) {
    std::string s;
    for (std::size_t i = 0; i < params.size(); ++i) s += (i ? "," : "") + params[i].first + "=" + format_double(params[i].second);
    return s;
}

fs::path scenario_dir(const ExperimentSpec& spec, const std::string& scenario, ModelCase c) {
    return fs::path(spec.output_dir) / scenario / to_string(c);
}

Trajectory simulate_sgd(const GenerativeConfig& cfg, MicroState s, const BetaSchedule& schedule, double t_end,
                        int record_points, Rng& rng) {
    require(t_end > 0.0 && record_points >= 2, "simulate_sgd: need t_end > 0 and at least two records");
    schedule.validate();
    const double N = double(cfg.N);
    const long total = std::lround(t_end * N);
    require(total >= record_points - 1, "simulate_sgd: fewer SGD steps than record intervals");
    Trajectory tr;
    auto record = [&](double t, long step) {
        Macro m = measure_macro(s, cfg);
        tr.times.push_back(t);
        tr.beta.push_back(beta_at(schedule, double(step) / N));
        tr.eps_g.push_back(generalization_error(m, cfg.rho));
        tr.states.push_back(std::move(m));
    };
    long step = 0;
    record(0.0, 0);
    for (int r = 1; r < record_points; ++r) {
        const double t = t_end * double(r) / double(record_points - 1);
        const long target = std::lround(t * N);
        for (; step < target; ++step) {
            s.hyper.beta = beta_at(schedule, double(step) / N);
            const Sample x = draw_sample(cfg, rng);
            try {
                sgd_step_inplace(s, x, cfg);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " at t=" + format_double(double(step) / N));
            }
        }
        if (!s.W.allFinite() || !s.V.allFinite())
            throw NumericalError("simulate_sgd: non-finite weights at t=" + format_double(t));
        record(t, step);
    }
    return tr;
}

SgdSetup make_sgd_setup(const ExperimentSpec& spec, ModelCase c, int N, int seed_index, const BetaSchedule& sched) {
    SgdSetup out{job_rng(spec.seed, {std::uint64_t(c == ModelCase::matched ? 0 : 1), std::uint64_t(N),
                                     std::uint64_t(seed_index)}),
                 {},
                 {}};
    out.cfg = GenerativeConfig::make(N, spec.factors(c), spec.rho, spec.eta, out.rng);
    Hyper h;
    h.beta = beta_at(sched, 0.0);
    h.lambda = spec.lambda;
    h.tau_W = spec.tau_W;
    h.tau_V = spec.tau_V;
    h.tau_D = spec.tau_D;
    out.state = init_micro(out.cfg, spec.latents(c), h, init_options(spec), out.rng);
    return out;
}

namespace {
Trajectory sgd_run(const ExperimentSpec& spec, ModelCase c, int N, int seed_index, const BetaSchedule& sched) {
    SgdSetup su = make_sgd_setup(spec, c, N, seed_index, sched);
    return simulate_sgd(su.cfg, std::move(su.state), sched, spec.t_end, spec.record_points, su.rng);
}
}  // namespace

Fig1Result run_fig1(const ExperimentSpec& spec, const RunContext& ctx) {
    spec.validate();
    require(spec.Ns.size() == 1, "fig1: expects a single N");
    const int N = spec.Ns.front();
    struct Job {
        std::size_t panel;
        int seed;  // -1 for the ODE curve
    };
    Fig1Result res;
    std::vector<Job> jobs;
    for (ModelCase c : spec.cases)
        for (double b : spec.betas) {
            Fig1Panel p;
            p.model_case = c;
            p.beta = b;
            p.sgd.resize(spec.seeds);
            res.panels.push_back(std::move(p));
            for (int s = -1; s < spec.seeds; ++s) jobs.push_back({res.panels.size() - 1, s});
        }
    parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
        Fig1Panel& p = res.panels[jobs[i].panel];
        const BetaSchedule sched = BetaSchedule::constant(p.beta);
        std::ostringstream where;
        where << "fig1 case=" << to_string(p.model_case) << " beta=" << format_double(p.beta);
        if (jobs[i].seed >= 0) where << " seed=" << jobs[i].seed;
        with_context(where.str(), [&] {
            if (jobs[i].seed < 0) {
                p.ode = integrate(initial_macro(spec, p.model_case), spec.ode_params(sched), integrate_options(spec));
            } else {
                p.sgd[jobs[i].seed] = sgd_run(spec, p.model_case, N, jobs[i].seed, sched);
            }
        });
        ctx.log(where.str() + " done");
    });

    if (!ctx.write) return res;
    for (const auto& p : res.panels) {
        const fs::path dir = scenario_dir(spec, "fig1", p.model_case);
        const std::string stem = param_tuple({{"beta", p.beta}});
        res.files.push_back(dir / (stem + ",source=ode.csv"));
        write_trajectory_csv(res.files.back(), p.ode);
        for (int s = 0; s < spec.seeds; ++s) {
            res.files.push_back(dir / (param_tuple({{"beta", p.beta}, {"N", double(N)}, {"seed", double(s)}}) + ".csv"));
            write_trajectory_csv(res.files.back(), p.sgd[s]);
        }
        std::vector<std::string> obs{"eps_g"};
        const int M = p.ode.states.front().M();
        for (int i = 1; i <= M; ++i) obs.push_back("m_" + std::to_string(i) + "_1");
        for (int i = 1; i <= M; ++i) obs.push_back("Q_" + std::to_string(i) + "_" + std::to_string(i));
        if (M >= 2) obs.push_back("E_1_2");
        std::vector<std::string> header{"t"};
        for (const auto& o : obs) {
            header.push_back("ode_" + o);
            header.push_back("sgd_" + o + "_mean");
            header.push_back("sgd_" + o + "_std");
        }
        res.files.push_back(dir / (stem + ".csv"));
        CsvWriter w(res.files.back(), header);
        for (std::size_t k = 0; k < p.ode.size(); ++k) {
            w.cell(p.ode.times[k]);
            for (const auto& o : obs) {
                std::vector<double> v;
                for (const auto& tr : p.sgd) v.push_back(observable(tr, k, o));
                w.cell(observable(p.ode, k, o)).cell(mean_of(v)).cell(std_of(v));
            }
            w.end_row();
        }
        w.close();
    }
    return res;
}

Fig2Result run_fig2(const ExperimentSpec& spec, const RunContext& ctx) {
    spec.validate();
    Fig2Result res;
    for (ModelCase c : spec.cases)
        for (double b : spec.betas) {
            require(b > 0.0, "fig2: beta = 0 drives D to zero; use a positive grid");
            Fig2Row r;
            r.model_case = c;
            r.beta = b;
            r.closed_form = steady_state_eps(c, b, spec.rho, spec.eta);
            r.marginal = std::abs(b - (spec.rho + spec.eta)) < 1e-12 ||
                         (c == ModelCase::mismatched && std::abs(b - spec.eta) < 1e-12);
            res.rows.push_back(r);
        }
    parallel_for(res.rows.size(), spec.jobs, [&](std::size_t i) {
        Fig2Row& r = res.rows[i];
        const std::string where = "fig2 case=" + to_string(r.model_case) + " beta=" + format_double(r.beta);
        with_context(where, [&] {
            IntegrateOptions o = integrate_options(spec);
            o.record_points = 2;
            const Trajectory tr =
                integrate(initial_macro(spec, r.model_case), spec.ode_params(BetaSchedule::constant(r.beta)), o);
            r.integrated = tr.eps_g.back();
        });
        ctx.log(where + " done");
    });
    if (!ctx.write) return res;
    for (ModelCase c : spec.cases) {
        res.files.push_back(scenario_dir(spec, "fig2", c) /
                            (param_tuple({{"rho", spec.rho}, {"eta", spec.eta}}) + ".csv"));
        CsvWriter w(res.files.back(), {"beta", "closed_form", "integrated", "abs_diff", "marginal"});
        for (const auto& r : res.rows) {
            if (r.model_case != c) continue;
            w.cell(r.beta).cell(r.closed_form).cell(r.integrated).cell(std::abs(r.integrated - r.closed_form));
            w.cell(long(r.marginal));
            w.end_row();
        }
        w.close();
    }
    return res;
}

AnnealResult anneal_sweep(const ExperimentSpec& spec, ModelCase c, const std::vector<ScheduleKind>& kinds,
                          const std::string& scenario, const RunContext& ctx) {
    spec.validate();
    const double beta = spec.betas.front();
    AnnealResult res;
    res.eps_star = steady_state_eps(c, beta, spec.rho, spec.eta);
    const double tau = spec.tau_W;
    if (std::abs(spec.rho + spec.eta - 2.0) < 1e-12 && beta == 1.0 && spec.tau_V == tau && spec.tau_D == tau) {
        res.jmax = jmax(spec.eta, tau);
        res.jmax_numeric = jmax_numeric(spec.eta, tau);
    } else {
        // outside the closed-form parameterisation only the numeric value is available
        const auto pts = fixed_points(c, beta, spec.rho, spec.eta);
        double best = -INFINITY;
        for (const auto& r : pts)
            if (r.verdict != Verdict::unstable) best = std::max(best, r.max_real());
        res.jmax = res.jmax_numeric = best * tau;
    }
    res.threshold = -0.5 * res.jmax;

    struct Job {
        int sweep;  // -1: constant baseline
        std::size_t row;
    };
    std::vector<Job> jobs{{-1, 0}};
    for (ScheduleKind k : kinds) {
        AnnealSweep s;
        s.kind = k;
        for (double g : spec.gammas) s.rows.push_back({g, std::nullopt});
        res.sweeps.push_back(std::move(s));
        for (std::size_t i = 0; i < spec.gammas.size(); ++i) jobs.push_back({int(res.sweeps.size()) - 1, i});
    }
    auto schedule_of = [&](const Job& j) {
        if (j.sweep < 0) return BetaSchedule::constant(beta);
        const double g = res.sweeps[j.sweep].rows[j.row].gamma;
        switch (res.sweeps[j.sweep].kind) {
            case ScheduleKind::tanh: return BetaSchedule::tanh(g);
            case ScheduleKind::linear: return BetaSchedule::linear(g, spec.beta_cap);
            default: throw ConfigError("anneal sweep: schedule must be tanh or linear");
        }
    };
    parallel_for(jobs.size(), spec.jobs, [&](std::size_t i) {
        const Job& j = jobs[i];
        const BetaSchedule sched = schedule_of(j);
        std::string where = scenario + " case=" + to_string(c) + " schedule=" + to_string(sched.kind);
        if (j.sweep >= 0) where += " gamma=" + format_double(sched.gamma);
        with_context(where, [&] {
            IntegrateOptions o = integrate_options(spec);
            const Trajectory tr = integrate(initial_macro(spec, c), spec.ode_params(sched), o);
            const auto t = convergence_time(tr, res.eps_star, spec.delta);
            if (j.sweep < 0) res.constant_time = t;
            else res.sweeps[j.sweep].rows[j.row].time = t;
        });
        ctx.log(where + " done");
    });
    for (auto& s : res.sweeps)
        for (std::size_t i = 0; i < s.rows.size(); ++i)
            if (s.rows[i].time && (!s.best || *s.rows[i].time < *s.rows[*s.best].time)) s.best = i;

    if (!ctx.write) return res;
    const fs::path dir = scenario_dir(spec, scenario, c);
    for (const auto& s : res.sweeps) {
        res.files.push_back(dir / ("convergence,schedule=" + to_string(s.kind) + ".csv"));
        CsvWriter w(res.files.back(), {"gamma", "convergence_time", "converged", "below_threshold"});
        for (const auto& r : s.rows) {
            w.cell(r.gamma).cell(r.time ? format_double(*r.time) : std::string("nan")).cell(long(r.time.has_value()));
            w.cell(long(r.gamma <= res.threshold));
            w.end_row();
        }
        w.close();
    }
    res.files.push_back(dir / "threshold.csv");
    CsvWriter w(res.files.back(), {"beta", "eps_star", "delta", "jmax", "jmax_numeric", "threshold",
                                   "constant_time", "constant_converged"});
    w.cell(beta).cell(res.eps_star).cell(spec.delta).cell(res.jmax).cell(res.jmax_numeric).cell(res.threshold);
    w.cell(res.constant_time ? format_double(*res.constant_time) : std::string("nan"));
    w.cell(long(res.constant_time.has_value()));
    w.end_row();
    w.close();
    return res;
}

AnnealResult run_fig3(const ExperimentSpec& spec, const RunContext& ctx) {
    require(spec.cases.size() == 1, "fig3: expects a single case");
    const ModelCase c = spec.cases.front();
    AnnealResult res = anneal_sweep(spec, c, {ScheduleKind::tanh}, "fig3", ctx);
    if (!ctx.write) return res;
    const fs::path dir = scenario_dir(spec, "fig3", c);
    const double beta = spec.betas.front();
    res.files.push_back(dir / (param_tuple({{"beta", beta}}) + ",schedule=constant.csv"));
    write_trajectory_csv(res.files.back(),
                         integrate(initial_macro(spec, c), spec.ode_params(BetaSchedule::constant(beta)),
                                   integrate_options(spec)));
    const auto& sw = res.sweeps.front();
    if (sw.best) {
        const double g = sw.rows[*sw.best].gamma;
        res.files.push_back(dir / (param_tuple({{"gamma", g}}) + ",schedule=tanh.csv"));
        write_trajectory_csv(res.files.back(), integrate(initial_macro(spec, c),
                                                         spec.ode_params(BetaSchedule::tanh(g)), integrate_options(spec)));
    }
    return res;
}

namespace {
/// Piecewise-linear interpolation of a convergence curve in log gamma; nullopt off-grid or across a gap.
std::optional<double> interp_time(const AnnealSweep& s, double g) {
    for (std::size_t i = 0; i + 1 < s.rows.size(); ++i) {
        const double a = s.rows[i].gamma, b = s.rows[i + 1].gamma;
        if (g < a || g > b) continue;
        if (!s.rows[i].time || !s.rows[i + 1].time) return std::nullopt;
        const double w = (std::log(g) - std::log(a)) / (std::log(b) - std::log(a));
        return (1 - w) * *s.rows[i].time + w * *s.rows[i + 1].time;
    }
    return std::nullopt;
}
}  // namespace

SuppLinearResult run_supp_linear(const ExperimentSpec& spec, const RunContext& ctx) {
    require(spec.cases.size() == 1, "supp_linear: expects a single case");
    const ModelCase c = spec.cases.front();
    SuppLinearResult res;
    res.sweep = anneal_sweep(spec, c, {ScheduleKind::tanh, ScheduleKind::linear}, "supp_linear", ctx);
    const AnnealSweep& th = res.sweep.sweeps[0];
    const AnnealSweep& li = res.sweep.sweeps[1];
    if (th.best && li.best) {
        const double scale = li.rows[*li.best].gamma / th.rows[*th.best].gamma;
        for (const auto& r : th.rows) {
            if (!r.time) continue;
            if (auto t = interp_time(li, r.gamma * scale)) res.similarity_gap = std::max(res.similarity_gap, std::abs(*t - *r.time) / *r.time);
        }
    }
    const double g = *std::max_element(spec.gammas.begin(), spec.gammas.end());
    const double cap = 2.0 * (spec.rho + spec.eta);
    with_context("supp_linear uncapped gamma=" + format_double(g), [&] {
        const Trajectory tr = integrate(initial_macro(spec, c), spec.ode_params(BetaSchedule::linear(g, cap)),
                                        integrate_options(spec));
        res.uncapped_final_eps = tr.eps_g.back();
        if (ctx.write) {
            const fs::path f = scenario_dir(spec, "supp_linear", c) /
                               (param_tuple({{"gamma", g}, {"beta_cap", cap}}) + ",schedule=linear.csv");
            write_trajectory_csv(f, tr);
            res.sweep.files.push_back(f);
        }
    });
    if (ctx.write) {
        const fs::path f = scenario_dir(spec, "supp_linear", c) / "similarity.csv";
        CsvWriter w(f, {"tanh_best_gamma", "tanh_best_time", "linear_best_gamma", "linear_best_time",
                        "max_relative_gap", "uncapped_beta_cap", "uncapped_final_eps_g"});
        auto cell_best = [&](const AnnealSweep& s) {
            if (s.best) w.cell(s.rows[*s.best].gamma).cell(*s.rows[*s.best].time);
            else w.cell(std::string("nan")).cell(std::string("nan"));
        };
        cell_best(th);
        cell_best(li);
        w.cell(res.similarity_gap).cell(cap).cell(res.uncapped_final_eps);
        w.end_row();
        w.close();
        res.sweep.files.push_back(f);
    }
    return res;
}

std::pair<double, double> ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 3, "ols_slope: need at least three points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "ols_slope: x values are all equal");
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - my - slope * (x[i] - mx);
        rss += r * r;
    }
    return {slope, std::sqrt(rss / double(x.size() - 2) / sxx)};
}

RateResult run_rate_check(const ExperimentSpec& spec, const RunContext& ctx) {
    spec.validate();
    require(spec.cases.size() == 1, "rate_check: expects a single case");
    const ModelCase c = spec.cases.front();
    const BetaSchedule sched = spec.schedule_for(spec.betas.front(), spec.gammas.front());
    Trajectory ode;
    with_context("rate_check ode", [&] {
        ode = integrate(initial_macro(spec, c), spec.ode_params(sched), integrate_options(spec));
    });
    RateResult res;
    for (int N : spec.Ns) res.rows.push_back({N, std::vector<double>(spec.seeds, 0.0), 0.0, 0.0});
    parallel_for(spec.Ns.size() * std::size_t(spec.seeds), spec.jobs, [&](std::size_t i) {
        RateRow& row = res.rows[i / spec.seeds];
        const int seed = int(i % spec.seeds);
        const std::string where = "rate_check N=" + std::to_string(row.N) + " seed=" + std::to_string(seed);
        with_context(where, [&] {
            const Trajectory tr = sgd_run(spec, c, row.N, seed, sched);
            double dev = 0.0;
            for (std::size_t k = 0; k < tr.size(); ++k) dev = std::max(dev, frobenius_distance(tr.states[k], ode.states[k]));
            row.deviations[seed] = dev;
        });
        ctx.log(where + " done");
    });
    std::vector<double> lx, ly;
    for (auto& r : res.rows) {
        r.mean = mean_of(r.deviations);
        r.std = std_of(r.deviations);
        for (double d : r.deviations) {
            lx.push_back(std::log(double(r.N)));
            ly.push_back(std::log(d));
        }
    }
    if (lx.size() >= 3) {
        std::tie(res.slope, res.slope_se) = ols_slope(lx, ly);
        const double t = t_quantile_975(double(lx.size() - 2));
        res.ci_low = res.slope - t * res.slope_se;
        res.ci_high = res.slope + t * res.slope_se;
    }
    if (!ctx.write) return res;
    const fs::path dir = scenario_dir(spec, "rate_check", c);
    res.files.push_back(dir / "deviation.csv");
    CsvWriter w(res.files.back(), {"N", "seed", "max_frobenius_deviation"});
    for (const auto& r : res.rows)
        for (int s = 0; s < spec.seeds; ++s) {
            w.cell(long(r.N)).cell(long(s)).cell(r.deviations[s]);
            w.end_row();
        }
    w.close();
    res.files.push_back(dir / "summary.csv");
    CsvWriter ws(res.files.back(), {"N", "mean", "std", "seeds"});
    for (const auto& r : res.rows) {
        ws.cell(long(r.N)).cell(r.mean).cell(r.std).cell(long(spec.seeds));
        ws.end_row();
    }
    ws.close();
    res.files.push_back(dir / "slope.csv");
    CsvWriter wl(res.files.back(), {"slope", "slope_se", "ci95_low", "ci95_high"});
    wl.cell(res.slope).cell(res.slope_se).cell(res.ci_low).cell(res.ci_high);
    wl.end_row();
    wl.close();
    return res;
}

}  // namespace vaedyn
