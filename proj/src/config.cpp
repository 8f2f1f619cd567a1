#include "vaedyn/config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

namespace vaedyn {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::fig1: return "fig1";
        case Scenario::fig2: return "fig2";
        case Scenario::fig3: return "fig3";
        case Scenario::supp_linear: return "supp_linear";
        case Scenario::rate_check: return "rate_check";
        case Scenario::custom: return "custom";
    }
    return "custom";
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "fig1") return Scenario::fig1;
    if (s == "fig2") return Scenario::fig2;
    if (s == "fig3") return Scenario::fig3;
    if (s == "supp_linear" || s == "supp-linear") return Scenario::supp_linear;
    if (s == "rate_check" || s == "rate-check") return Scenario::rate_check;
    if (s == "custom") return Scenario::custom;
    throw ConfigError("unknown scenario '" + s + "'");
}

std::string default_output_root() {
    const char* env = std::getenv("VAEDYN_OUTPUT_ROOT");
    return env && *env ? std::string(env) : std::string("vaedyn_out");
}

OdeParams ExperimentSpec::ode_params(const BetaSchedule& sched) const {
    OdeParams p;
    p.rho = rho;
    p.eta = eta;
    p.lambda = lambda;
    p.tau_W = tau_W;
    p.tau_V = tau_V;
    p.tau_D = tau_D;
    p.schedule = sched;
    p.small_rate_limit = small_rate_limit;
    p.d_drift_half_factor = d_drift_half_factor;
    p.r_cross = r_cross;
    return p;
}

BetaSchedule ExperimentSpec::schedule_for(double beta, double gamma) const {
    switch (schedule) {
        case ScheduleKind::constant: return BetaSchedule::constant(beta);
        case ScheduleKind::tanh: return BetaSchedule::tanh(gamma);
        case ScheduleKind::linear: return BetaSchedule::linear(gamma, beta_cap);
        case ScheduleKind::step: return BetaSchedule::step(beta, epsilon, beta_cap);
    }
    return BetaSchedule::constant(beta);
}

void ExperimentSpec::validate() const {
    require(!cases.empty(), "config: case list is empty");
    require(!betas.empty(), "config: beta grid is empty");
    require(!gammas.empty(), "config: gamma grid is empty");
    require(!Ns.empty(), "config: N grid is empty");
    require(seeds >= 1, "config: seeds must be at least 1");
    require(M >= 0 && M_star >= 0, "config: M and M_star must be nonnegative");
    for (double b : betas) require(b >= 0.0 && std::isfinite(b), "config: beta values must be finite and nonnegative");
    for (double g : gammas) require(g > 0.0 && std::isfinite(g), "config: gamma values must be positive");
    for (int n : Ns) require(n >= 2, "config: N values must be at least 2");
    require(rho >= 0.0 && eta >= 0.0 && rho + eta > 0.0, "config: rho, eta must be nonnegative with positive sum");
    require(lambda >= 0.0, "config: lambda must be nonnegative");
    require(tau_W > 0.0 && tau_V > 0.0 && tau_D > 0.0, "config: learning rates must be positive");
    require(dt >= 0.0, "config: dt must be nonnegative (0 selects the default)");
    require(t_end > 0.0, "config: t_end must be positive");
    require(record_points >= 2, "config: record_points must be at least 2");
    require(init_scale >= 0.0 && init_overlap >= 0.0, "config: init_scale and init_overlap must be nonnegative");
    require(beta_cap >= 0.0, "config: beta_cap must be nonnegative");
    require(epsilon >= 0.0, "config: epsilon must be nonnegative");
    require(delta > 0.0, "config: delta must be positive");
    require(jobs >= 0, "config: jobs must be nonnegative");
    require(!output_dir.empty(), "config: output_dir is empty");
}

namespace {

std::vector<double> lin_grid(double a, double b, double step) {
    require(step > 0.0 && b >= a, "grid: lin needs start <= stop and step > 0");
    const long n = std::lround(std::floor((b - a) / step + 1e-9));
    require(n < 1000000, "grid: too many points");
    std::vector<double> v;
    for (long i = 0; i <= n; ++i) v.push_back(std::round((a + double(i) * step) * 1e12) / 1e12);
    return v;
}

std::vector<double> log_grid(double a, double b, long count) {
    require(a > 0.0 && b > a && count >= 2, "grid: log needs 0 < start < stop and count >= 2");
    std::vector<double> v;
    const double la = std::log10(a), lb = std::log10(b);
    for (long i = 0; i < count; ++i) v.push_back(std::pow(10.0, la + (lb - la) * double(i) / double(count - 1)));
    v.front() = a;
    v.back() = b;
    return v;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) {
        const auto a = cur.find_first_not_of(" \t");
        const auto b = cur.find_last_not_of(" \t");
        out.push_back(a == std::string::npos ? std::string() : cur.substr(a, b - a + 1));
    }
    return out;
}

long parse_long(const std::string& s, const std::string& key) {
    const double v = parse_double(s, key);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return long(v);
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

struct KeyHandler {
    KeyDoc doc;
    std::function<void(ExperimentSpec&, const std::string&)> set;
    std::function<std::string(const ExperimentSpec&)> get;
};

KeyHandler real_key(const std::string& name, double ExperimentSpec::*field, const std::string& help) {
    return {{name, "real", help},
            [=](ExperimentSpec& s, const std::string& v) { s.*field = parse_double(v, name); },
            [=](const ExperimentSpec& s) { return format_double(s.*field); }};
}

KeyHandler int_key(const std::string& name, int ExperimentSpec::*field, const std::string& help) {
    return {{name, "integer", help},
            [=](ExperimentSpec& s, const std::string& v) {
                const long x = parse_long(v, name);
                require(x >= -2147483647L && x <= 2147483647L, name + ": out of range");
                s.*field = int(x);
            },
            [=](const ExperimentSpec& s) { return std::to_string(s.*field); }};
}

KeyHandler bool_key(const std::string& name, bool ExperimentSpec::*field, const std::string& help) {
    return {{name, "bool", help},
            [=](ExperimentSpec& s, const std::string& v) { s.*field = parse_bool(v, name); },
            [=](const ExperimentSpec& s) { return std::string(s.*field ? "true" : "false"); }};
}

const std::vector<KeyHandler>& handlers() {
    static const std::vector<KeyHandler> h = {
        {{"scenario", "fig1|fig2|fig3|supp_linear|rate_check|custom", "experiment preset; echoed for the manifest"},
         [](ExperimentSpec& s, const std::string& v) { s.scenario = scenario_from_string(v); },
         [](const ExperimentSpec& s) { return to_string(s.scenario); }},
        {{"case", "matched|mismatched|both", "model case: (M, M*) = (1, 1) or (2, 1)"},
         [](ExperimentSpec& s, const std::string& v) {
             s.cases.clear();
             for (const auto& c : split_list(v, ',')) {
                 if (c == "both") {
                     s.cases = {ModelCase::matched, ModelCase::mismatched};
                 } else {
                     s.cases.push_back(model_case_from_string(c));
                 }
             }
         },
         [](const ExperimentSpec& s) {
             std::string out;
             for (std::size_t i = 0; i < s.cases.size(); ++i) out += (i ? "," : "") + to_string(s.cases[i]);
             return out;
         }},
        int_key("M", &ExperimentSpec::M, "latent dimension override (0: from case)"),
        int_key("M_star", &ExperimentSpec::M_star, "factor count override (0: from case)"),
        {{"beta", "grid", "KL weight grid (constant and step schedules)"},
         [](ExperimentSpec& s, const std::string& v) { s.betas = parse_grid(v, "beta"); },
         [](const ExperimentSpec& s) { return join(s.betas); }},
        {{"gamma", "grid", "annealing rate grid (tanh and linear schedules)"},
         [](ExperimentSpec& s, const std::string& v) { s.gammas = parse_grid(v, "gamma"); },
         [](const ExperimentSpec& s) { return join(s.gammas); }},
        {{"N", "integer grid", "input dimension grid for SGD runs"},
         [](ExperimentSpec& s, const std::string& v) {
             s.Ns.clear();
             for (double x : parse_grid(v, "N")) {
                 if (x != std::floor(x) || x > 1e8) throw ConfigError("N: expected integers");
                 s.Ns.push_back(int(x));
             }
         },
         [](const ExperimentSpec& s) {
             std::string out;
             for (std::size_t i = 0; i < s.Ns.size(); ++i) out += (i ? "," : "") + std::to_string(s.Ns[i]);
             return out;
         }},
        int_key("seeds", &ExperimentSpec::seeds, "SGD runs per grid point"),
        {{"seed", "unsigned integer", "base seed; run k of a grid point uses a seed sequence built from it"},
         [](ExperimentSpec& s, const std::string& v) {
             try {
                 std::size_t pos = 0;
                 const unsigned long long x = std::stoull(v, &pos);
                 if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
                 s.seed = x;
             } catch (const std::logic_error&) {
                 throw ConfigError("seed: expected an unsigned integer, got '" + v + "'");
             }
         },
         [](const ExperimentSpec& s) { return std::to_string(s.seed); }},
        real_key("rho", &ExperimentSpec::rho, "signal strength"),
        real_key("eta", &ExperimentSpec::eta, "noise strength"),
        real_key("lambda", &ExperimentSpec::lambda, "weight decay"),
        {{"tau", "real", "input only: sets tau_W, tau_V and tau_D"},
         [](ExperimentSpec& s, const std::string& v) { s.tau_W = s.tau_V = s.tau_D = parse_double(v, "tau"); },
         nullptr},
        real_key("tau_W", &ExperimentSpec::tau_W, "decoder learning rate"),
        real_key("tau_V", &ExperimentSpec::tau_V, "encoder learning rate"),
        real_key("tau_D", &ExperimentSpec::tau_D, "posterior variance learning rate"),
        bool_key("small_rate_limit", &ExperimentSpec::small_rate_limit, "drop the O(tau^2) terms of the ODE"),
        bool_key("d_drift_half_factor", &ExperimentSpec::d_drift_half_factor, "1/2 prefactor in dD/dt"),
        {{"r_cross", "derived|unit", "sign convention of the tau_W tau_V term in dR/dt"},
         [](ExperimentSpec& s, const std::string& v) {
             if (v == "derived") s.r_cross = RCrossTerm::derived;
             else if (v == "unit") s.r_cross = RCrossTerm::unit;
             else throw ConfigError("r_cross: expected derived or unit, got '" + v + "'");
         },
         [](const ExperimentSpec& s) { return std::string(s.r_cross == RCrossTerm::derived ? "derived" : "unit"); }},
        real_key("dt", &ExperimentSpec::dt, "RK4 step (0: 0.02 / tau_max, tighter for fast tanh)"),
        real_key("t_end", &ExperimentSpec::t_end, "horizon in rescaled time t = step / N"),
        int_key("record_points", &ExperimentSpec::record_points, "evenly spaced records including both ends"),
        real_key("init_scale", &ExperimentSpec::init_scale, "std of the i.i.d. normal part of W and V"),
        real_key("init_overlap", &ExperimentSpec::init_overlap, "planted overlap of latent k with factor k mod M*"),
        {{"schedule", "constant|step|linear|tanh", "beta schedule for simulate/integrate/anneal runs"},
         [](ExperimentSpec& s, const std::string& v) { s.schedule = schedule_kind_from_string(v); },
         [](const ExperimentSpec& s) { return to_string(s.schedule); }},
        real_key("beta_cap", &ExperimentSpec::beta_cap, "ceiling of step and linear schedules"),
        real_key("epsilon", &ExperimentSpec::epsilon, "per-step increment of the step schedule"),
        real_key("delta", &ExperimentSpec::delta, "convergence offset above the steady-state eps_g"),
        int_key("jobs", &ExperimentSpec::jobs, "worker threads (0: hardware concurrency)"),
        {{"output_dir", "path", "output root; files go to <output_dir>/<scenario>/<case>/"},
         [](ExperimentSpec& s, const std::string& v) { s.output_dir = v; },
         [](const ExperimentSpec& s) { return s.output_dir; }},
    };
    return h;
}

const KeyHandler* find_handler(const std::string& key) {
    for (const auto& h : handlers())
        if (h.doc.key == key) return &h;
    return nullptr;
}

}  // namespace

std::vector<double> parse_grid(const std::string& text, const std::string& key) {
    if (text.empty()) throw ConfigError(key + ": empty grid");
    if (text.rfind("lin:", 0) == 0 || text.rfind("log:", 0) == 0) {
        const auto parts = split_list(text.substr(4), ':');
        if (parts.size() != 3) throw ConfigError(key + ": expected " + text.substr(0, 3) + ":start:stop:step|count");
        const double a = parse_double(parts[0], key), b = parse_double(parts[1], key);
        if (text[1] == 'i') return lin_grid(a, b, parse_double(parts[2], key));
        return log_grid(a, b, parse_long(parts[2], key));
    }
    std::vector<double> v;
    for (const auto& p : split_list(text, ',')) v.push_back(parse_double(p, key));
    return v;
}

const std::vector<KeyDoc>& config_schema() {
    static const std::vector<KeyDoc> docs = [] {
        std::vector<KeyDoc> d;
        for (const auto& h : handlers()) d.push_back(h.doc);
        return d;
    }();
    return docs;
}

std::string describe_schema(const ExperimentSpec& base) {
    std::ostringstream out;
    out << "Config keys (key = value; '#' starts a comment). Grids: a,b,c | lin:start:stop:step | "
           "log:start:stop:count.\n";
    for (const auto& h : handlers()) {
        out << "  " << h.doc.key << " (" << h.doc.type << ")";
        if (h.get) out << " [default " << h.get(base) << "]";
        out << ": " << h.doc.help << "\n";
    }
    return out.str();
}

void apply_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
    const KeyHandler* h = find_handler(key);
    if (!h) throw ConfigError("unknown config key '" + key + "'");
    h->set(spec, value);
}

void apply_key_values(ExperimentSpec& spec, const KeyValues& kv) {
    for (const auto& [k, v] : kv) apply_key(spec, k, v);
}

KeyValues to_key_values(const ExperimentSpec& spec) {
    KeyValues kv;
    for (const auto& h : handlers())
        if (h.get) kv[h.doc.key] = h.get(spec);
    return kv;
}

ExperimentSpec preset(Scenario s) {
    ExperimentSpec e;
    e.scenario = s;
    e.output_dir = default_output_root();
    switch (s) {
        case Scenario::fig1:
            e.cases = {ModelCase::matched, ModelCase::mismatched};
            e.betas = {0.2, 0.5, 1.0, 1.5, 2.0, 2.5};
            e.Ns = {500};
            e.seeds = 5;
            e.t_end = 3000.0;
            e.record_points = 201;
            break;
        case Scenario::fig2:
            e.cases = {ModelCase::matched, ModelCase::mismatched};
            e.betas = lin_grid(0.1, 3.0, 0.1);
            e.tau_W = e.tau_V = e.tau_D = 1.0;
            e.small_rate_limit = true;
            // only the endpoint is compared and it does not depend on the step
            e.dt = 0.1;
            e.t_end = 3000.0;
            e.record_points = 301;
            break;
        case Scenario::fig3:
        case Scenario::supp_linear:
            e.cases = {ModelCase::matched};
            e.betas = {1.0};
            e.gammas = log_grid(0.01, 10.0, 61);
            e.tau_W = e.tau_V = e.tau_D = 1.0;
            e.small_rate_limit = true;
            e.t_end = 400.0;
            e.record_points = 40001;
            e.schedule = ScheduleKind::tanh;
            break;
        case Scenario::rate_check:
            e.cases = {ModelCase::matched};
            e.betas = {1.0};
            e.Ns = {250, 500, 1000, 2000};
            e.seeds = 5;
            e.tau_W = e.tau_V = e.tau_D = 0.1;
            e.t_end = 100.0;
            e.record_points = 101;
            break;
        case Scenario::custom:
            break;
    }
    return e;
}

ExperimentSpec resolve(const Invocation& inv) {
    ExperimentSpec spec = preset(inv.scenario);
    if (!inv.config_path.empty()) {
        KeyValues file = read_key_values(inv.config_path);
        // a manifest doubles as a config file; its invocation keys are not experiment keys
        file.erase("subcommand");
        file.erase("verbosity");
        // the preset is chosen before the file is read; a differing scenario key would be ambiguous
        if (auto it = file.find("scenario"); it != file.end() && scenario_from_string(it->second) != inv.scenario) {
            spec = preset(scenario_from_string(it->second));
        }
        apply_key_values(spec, file);
    }
    for (const auto& [k, v] : inv.overrides) apply_key(spec, k, v);
    spec.validate();
    return spec;
}

KeyValues manifest_for(const Invocation& inv, const ExperimentSpec& resolved) {
    KeyValues kv = to_key_values(resolved);
    kv["subcommand"] = inv.subcommand;
    kv["verbosity"] = std::to_string(inv.verbosity);
    return kv;
}

Invocation invocation_from_manifest(const KeyValues& manifest) {
    Invocation inv;
    KeyValues kv = manifest;
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("manifest: missing key '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    inv.subcommand = take("subcommand");
    inv.verbosity = int(parse_long(take("verbosity"), "verbosity"));
    inv.scenario = scenario_from_string(kv.count("scenario") ? kv.at("scenario") : "custom");
    for (const auto& [k, v] : kv) {
        if (!find_handler(k)) throw ConfigError("manifest: unknown key '" + k + "'");
        inv.overrides.emplace_back(k, v);
    }
    return inv;
}

}  // namespace vaedyn
