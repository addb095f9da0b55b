#include "potpred/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "potpred/bayes.hpp"
#include "potpred/errors.hpp"
#include "potpred/estimation.hpp"
#include "potpred/io.hpp"
#include "potpred/predict.hpp"
#include "potpred/risk.hpp"
#include "potpred/simlab.hpp"
#include "potpred/timeseries.hpp"

namespace potpred::cli {

namespace {

using json = nlohmann::ordered_json;

struct Options {
    std::string input;
    std::string out;
    std::string format = "json";
    std::string config;
    std::size_t k = 0;
    std::string method = "ml";
    double tau_e = 0.0;
    double c = 0.0;
    double return_period = 0.0;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t burn_in = 5000;
    std::size_t draws = 20000;
    std::size_t thin = 1;
    std::string grid;
    std::size_t grid_points = 200;
    std::size_t window = 0;
    std::size_t stride = 1;
    std::string filter = "ar";
    std::size_t ar_order = 1;
    std::size_t k_min = 0;
    std::size_t k_max = 0;
    std::size_t k_step = 1;
    std::vector<double> periods;
    std::string table;
};

struct Binding {
    CLI::Option* option = nullptr;
    std::function<void(const json&)> assign;
};

struct Command {
    CLI::App* app = nullptr;
    std::map<std::string, Binding> bindings;  // config key -> option
    std::set<std::string> from_config;
    std::function<int()> run;

    bool given(const std::string& key) const {
        const auto it = bindings.find(key);
        return (it != bindings.end() && it->second.option->count() > 0) || from_config.count(key) > 0;
    }
};

std::string key_of(std::string flag) {
    std::replace(flag.begin(), flag.end(), '-', '_');
    return flag;
}

template <class T>
CLI::Option* add_bound(Command& cmd, const std::string& flag, T& target, const std::string& help) {
    CLI::Option* opt = cmd.app->add_option("--" + flag, target, help);
    cmd.bindings[key_of(flag)] = {opt, [&target](const json& j) { target = j.get<T>(); }};
    return opt;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DomainError(path + ": invalid JSON: " + e.what());
    }
}

void apply_config(Command& cmd, const std::string& path) {
    const json cfg = load_json(path);
    if (!cfg.is_object()) throw DomainError(path + ": config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        if (key == "command") {
            if (value != cmd.app->get_name()) throw DomainError(path + ": config is for command " + value.dump());
            continue;
        }
        const auto it = cmd.bindings.find(key);
        if (it == cmd.bindings.end() || key == "config") throw DomainError(path + ": unknown key '" + key + "'");
        if (it->second.option->count() > 0) continue;
        try {
            it->second.assign(value);
        } catch (const json::exception& e) {
            throw DomainError(path + ": bad value for '" + key + "': " + e.what());
        }
        cmd.from_config.insert(key);
    }
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json levels_json(const LevelPair& lp) {
    return json{{"tau_i", lp.tau_i()}, {"tau_e", lp.tau_e()}, {"tau_star", lp.tau_star()}};
}

json interval_json(const PredictiveInterval& pi) {
    return json{{"lower", pi.lower}, {"upper", pi.upper}, {"alpha", pi.alpha}, {"mass", pi.mass}};
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + '"';
}

void flatten(const json& j, const std::string& prefix, std::ostream& os) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, os);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), os);
    } else {
        os << csv_cell(prefix) << ',' << csv_cell(j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
    }
}

void write_flat_csv(const json& report, std::ostream& os) {
    os << "field,value\n";
    flatten(report, "", os);
}

class Runner {
public:
    Runner(Options& o, std::ostream& out) : o_(o), out_(out) {}

    void emit(const std::function<void(std::ostream&)>& body) const {
        if (o_.out.empty()) {
            body(out_);
            out_.flush();
        } else {
            write_file_atomic(o_.out, body);
        }
    }

    void emit_report(const json& report, const std::function<void(std::ostream&)>& csv) const {
        if (o_.format == "json") {
            emit([&](std::ostream& os) { os << report.dump(2) << '\n'; });
        } else {
            emit(csv);
        }
    }

    void emit_report(const json& report) const {
        emit_report(report, [&](std::ostream& os) { write_flat_csv(report, os); });
    }

    SamplerConfig sampler() const { return SamplerConfig{o_.seed, o_.burn_in, o_.draws, o_.thin}; }

    Method method() const { return parse_method(o_.method); }

private:
    Options& o_;
    std::ostream& out_;
};

void check_common(const Options& o) {
    if (o.format != "json" && o.format != "csv") throw DomainError("format must be json or csv");
    parse_method(o.method);
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    if (o.draws < 100) throw DomainError("draws must be at least 100");
    if (o.thin < 1) throw DomainError("thin must be at least 1");
}

void require_input(const Options& o) {
    if (o.input.empty()) throw DomainError("--input is required");
}

void require_k(const Command& cmd, const Options& o) {
    if (!cmd.given("k") || o.k < 1) throw DomainError("--k is required and must be positive");
}

json base_report(const char* command, const Options& o, const ExceedanceSet& e) {
    return json{{"command", command},
                {"method", o.method},
                {"n", e.n},
                {"k", e.k},
                {"tau_i", e.tau_i},
                {"threshold", e.threshold},
                {"dropped_ties", e.dropped_ties}};
}

double rule_gamma(const PredictiveModel& m) {
    if (!m.is_bayesian()) return m.params().gamma();
    double s = 0.0;
    for (const GpParams& d : m.draws()) s += d.gamma();
    return s / static_cast<double>(m.draws().size());
}

json posterior_json(const PosteriorSample& ps, const PosteriorSummary& sm) {
    const auto coord = [](const CoordinateSummary& c) {
        return json{{"mean", c.mean}, {"lower", c.lower}, {"upper", c.upper}};
    };
    return json{{"draws", sm.draws},
                {"level", sm.level},
                {"seed", ps.seed},
                {"burn_in", ps.burn_in},
                {"thin", ps.thin},
                {"acceptance_rate", ps.acceptance_rate},
                {"ess_gamma", ps.ess.gamma},
                {"ess_sigma", ps.ess.sigma},
                {"gamma", coord(sm.gamma)},
                {"sigma", coord(sm.sigma)},
                {"endpoint", sm.endpoint ? coord(*sm.endpoint) : json(nullptr)},
                {"endpoint_finite_fraction", sm.endpoint_finite_fraction},
                {"warnings", ps.warnings}};
}

int cmd_fit(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    require_k(cmd, o);
    const SortedSample s(read_column_file(o.input));
    const ExceedanceSet e = select_exceedances(s, o.k);
    json rep = base_report("fit", o, e);
    const Method m = r.method();
    if (m == Method::Bayes) {
        const PosteriorSample ps = sample_posterior(PriorSpec::default_for(e), e, r.sampler());
        const PosteriorSummary sm = posterior_summary(ps, 1.0 - o.alpha, e.threshold);
        rep["gamma"] = sm.gamma.mean;
        rep["sigma"] = sm.sigma.mean;
        rep["endpoint"] = sm.endpoint ? json(sm.endpoint->mean) : json(nullptr);
        rep["converged"] = true;
        rep["posterior"] = posterior_json(ps, sm);
    } else {
        const GpFit f = m == Method::ML ? fit_ml(e) : fit_pwm(e);
        rep["gamma"] = f.params.gamma();
        rep["sigma"] = f.params.sigma();
        rep["endpoint"] = number(endpoint_estimate(f, e.threshold));
        rep["converged"] = f.converged;
        if (m == Method::ML) {
            rep["diagnostics"] = json{{"loglik", f.loglik},
                                      {"grad_norm", f.grad_norm},
                                      {"iterations", f.iterations},
                                      {"at_boundary", f.at_boundary}};
        } else {
            rep["diagnostics"] = json{{"pwm_regime_ok", f.pwm_regime_ok}};
        }
    }
    r.emit_report(rep);
    return kOk;
}

int cmd_predict(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    const int rules = int(cmd.given("tau_e")) + int(cmd.given("c")) + int(cmd.given("return_period"));
    if (rules != 1) throw DomainError("give exactly one of --tau-e, --c, --return-period");
    if (cmd.given("grid") && o.grid_points < 2) throw DomainError("grid-points must be at least 2");
    const bool by_period = cmd.given("return_period");
    if (!by_period) require_k(cmd, o);
    const SortedSample s(read_column_file(o.input));

    std::size_t k = o.k;
    std::optional<ReturnPeriodLevels> rp;
    if (by_period) {
        rp = extreme_level_from_return_period(o.return_period, s.size());
        k = rp->k_tilde;
    }
    const ExceedanceSet e = select_exceedances(s, k);
    const PredictiveModel base = intermediate_model(e, r.method(), r.sampler());

    json rep = base_report("predict", o, e);
    LevelPair lp = LevelPair::intermediate(e.tau_i);
    if (rp) {
        lp = rp->levels;
        rep["rule"] = json{{"name", "return_period"}, {"value", o.return_period}};
    } else if (cmd.given("c")) {
        const double g = rule_gamma(base);
        lp = extreme_level_from_c(g, e.tau_i, o.c);
        rep["rule"] = json{{"name", "c"}, {"value", o.c}, {"gamma", g}};
    } else {
        lp = LevelPair(e.tau_i, o.tau_e);
        rep["rule"] = json{{"name", "tau_e"}, {"value", o.tau_e}};
    }
    const PredictiveModel m = base.with_levels(lp);
    const PredictiveInterval pi = predictive_interval(m, o.alpha);

    rep["levels"] = levels_json(lp);
    rep["extreme_threshold"] = var_from_predictive(base, lp.tau_star());
    json q = json::array();
    for (double p : {0.5 * o.alpha, 0.5, 1.0 - 0.5 * o.alpha})
        q.push_back(json{{"prob", p}, {"value", p > 0.5 ? m.upper_quantile(1.0 - p) : m.quantile(p)}});
    rep["quantiles"] = q;
    rep["interval"] = interval_json(pi);
    try {
        rep["mean"] = es_point_forecast(base, lp);
    } catch (const DomainError& err) {
        rep["mean"] = nullptr;
        rep["mean_reason"] = err.what();
    }
    if (cmd.given("grid")) {
        const double lo = m.quantile(0.0);
        const double hi = m.upper_quantile(1e-3);
        const auto rows = density_grid(m, lo, hi, o.grid_points);
        write_file_atomic(o.grid, [&](std::ostream& os) { write_grid_csv(os, rows); });
        rep["grid"] = json{{"path", o.grid}, {"points", rows.size()}, {"lower", lo}, {"upper", hi}};
    }
    r.emit_report(rep);
    return kOk;
}

int cmd_risk(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    require_k(cmd, o);
    if (!cmd.given("tau_e")) throw DomainError("--tau-e is required");
    const SortedSample s(read_column_file(o.input));
    const ExceedanceSet e = select_exceedances(s, o.k);
    const PredictiveModel base = intermediate_model(e, r.method(), r.sampler());
    const RiskReport rr = risk_report(base, r.method(), o.tau_e, o.alpha);
    json rep = base_report("risk", o, e);
    rep["levels"] = levels_json(LevelPair(e.tau_i, o.tau_e));
    rep["var"] = json{{"value", rr.var_point}, {"method", method_name(rr.method)}, {"source", "predictive quantile"}};
    rep["es"] = json{{"value", rr.es_point ? json(*rr.es_point) : json(nullptr)},
                     {"method", method_name(rr.method)},
                     {"source", "predictive mean"},
                     {"reason", rr.es_point ? json(nullptr) : json(rr.es_reason)}};
    rep["interval"] = rr.interval ? interval_json(*rr.interval) : json(nullptr);
    r.emit_report(rep);
    return kOk;
}

json forecast_row_json(const ForecastRow& f) {
    return json{{"origin", f.origin},
                {"target", f.target},
                {"mu_next", number(f.mu_next)},
                {"xi_next", number(f.xi_next)},
                {"tau_star", number(f.tau_star)},
                {"var", number(f.var)},
                {"lower", number(f.lower)},
                {"upper", number(f.upper)},
                {"realized", number(f.realized)},
                {"exceeds_var", f.exceeds_var},
                {"outside_interval", f.outside_interval},
                {"error", f.error.empty() ? json(nullptr) : json(f.error)}};
}

int cmd_ts(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    require_k(cmd, o);
    if (!cmd.given("window")) throw DomainError("--window is required");
    if (!cmd.given("tau_e")) throw DomainError("--tau-e is required");
    if (o.stride < 1) throw DomainError("stride must be at least 1");
    const FilterKind filter = parse_filter(o.filter);
    SeriesInput in = read_series_file(o.input);
    if (filter == FilterKind::External && in.mu_hat.empty())
        throw DomainError("the external filter needs the three-column (y, mu_hat, xi_hat) input");
    if (filter != FilterKind::External) {
        in.mu_hat.clear();
        in.xi_hat.clear();
    }
    RollingConfig cfg;
    cfg.filter = filter;
    cfg.ar_order = o.ar_order;
    cfg.k = o.k;
    cfg.tau_e = o.tau_e;
    cfg.alpha = o.alpha;
    cfg.method = r.method();
    cfg.sampler = r.sampler();
    cfg.seed = o.seed;
    const auto rows = rolling_forecast(in, o.window, o.stride, cfg);

    std::size_t errors = 0, scored = 0, exceed = 0, outside = 0;
    json jr = json::array();
    for (const ForecastRow& f : rows) {
        jr.push_back(forecast_row_json(f));
        if (!f.error.empty()) {
            ++errors;
            continue;
        }
        if (std::isnan(f.realized)) continue;
        ++scored;
        exceed += f.exceeds_var ? 1 : 0;
        outside += f.outside_interval ? 1 : 0;
    }
    json rep{{"command", "ts"},
             {"filter", filter_name(filter)},
             {"method", o.method},
             {"window", o.window},
             {"stride", o.stride},
             {"k", o.k},
             {"tau_e", o.tau_e},
             {"alpha", o.alpha},
             {"origins", rows.size()},
             {"errors", errors},
             {"scored", scored},
             {"var_exceedances", exceed},
             {"interval_violations", outside},
             {"exceedance_rate", scored ? json(static_cast<double>(exceed) / static_cast<double>(scored)) : json(nullptr)},
             {"violation_rate", exceed ? json(static_cast<double>(outside) / static_cast<double>(exceed)) : json(nullptr)},
             {"rows", jr}};
    r.emit_report(rep, [&](std::ostream& os) { write_forecast_csv(os, rows); });
    return kOk;
}

int cmd_trace(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    if (!cmd.given("k_min") || !cmd.given("k_max")) throw DomainError("--k-min and --k-max are required");
    if (o.k_min < 1 || o.k_max < o.k_min || o.k_step < 1) throw DomainError("need 1 <= k-min <= k-max and k-step >= 1");
    const SortedSample s(read_column_file(o.input));
    std::vector<std::size_t> ks;
    for (std::size_t k = o.k_min; k <= o.k_max; k += o.k_step) ks.push_back(k);
    const auto pts = gamma_stability_trace(s, ks, r.method());
    json rows = json::array();
    for (const auto& p : pts) {
        rows.push_back(json{{"k", p.k},
                            {"gamma", p.fit ? json(p.fit->params.gamma()) : json(nullptr)},
                            {"sigma", p.fit ? json(p.fit->params.sigma()) : json(nullptr)},
                            {"error", p.error.empty() ? json(nullptr) : json(p.error)}});
    }
    const json rep{{"command", "trace"}, {"method", o.method}, {"n", s.size()}, {"rows", rows}};
    r.emit_report(rep, [&](std::ostream& os) {
        os << "k,gamma,sigma,error\n" << std::setprecision(17);
        for (const auto& p : pts) {
            os << p.k << ',';
            if (p.fit) os << p.fit->params.gamma() << ',' << p.fit->params.sigma();
            else os << ',';
            os << ',' << csv_cell(p.error) << '\n';
        }
    });
    return kOk;
}

int cmd_return_levels(const Command& cmd, Options& o, const Runner& r) {
    require_input(o);
    require_k(cmd, o);
    if (o.periods.empty()) throw DomainError("--periods is required");
    const SortedSample s(read_column_file(o.input));
    const Method method = r.method();
    const SamplerConfig sampler = r.sampler();
    const ModelFactory factory = [&](std::size_t k) {
        return intermediate_model(select_exceedances(s, k), method, sampler);
    };
    const auto rows = return_level_curve(factory, s.size(), o.k, o.periods, o.alpha);
    json jr = json::array();
    for (const auto& row : rows) {
        jr.push_back(json{{"T", row.T},
                          {"tau_e", row.tau_e},
                          {"point", row.point},
                          {"k_tilde", row.k_tilde},
                          {"lower", row.lower},
                          {"upper", row.upper}});
    }
    const json rep{{"command", "return-levels"}, {"method", o.method}, {"n", s.size()}, {"k", o.k},
                   {"alpha", o.alpha}, {"rows", jr}};
    r.emit_report(rep, [&](std::ostream& os) { write_return_levels_csv(os, rows); });
    return kOk;
}

// Experiment configuration files.

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw DomainError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw DomainError(where + ": unknown key '" + key + "'");
}

Generator generator_from(const json& j) {
    check_keys(j, {"family", "params"}, "generator");
    const Family f = parse_family(j.at("family").get<std::string>());
    const auto p = j.value("params", std::vector<double>{});
    const auto arg = [&](std::size_t i) {
        if (i >= p.size()) throw DomainError(std::string("generator ") + family_name(f) + " needs more parameters");
        return p[i];
    };
    std::size_t expected = 2;
    Generator g;
    switch (f) {
        case Family::ExactGP: g = Generator::exact_gp(arg(0), arg(1)); break;
        case Family::Pareto: g = Generator::pareto(arg(0)); expected = 1; break;
        case Family::Frechet: g = Generator::frechet(arg(0)); expected = 1; break;
        case Family::Burr: g = Generator::burr(arg(0), arg(1)); break;
        case Family::Exponential: g = Generator::exponential(arg(0)); expected = 1; break;
        case Family::Beta: g = Generator::beta(arg(0), arg(1)); break;
    }
    if (p.size() != expected) throw DomainError(std::string("generator ") + family_name(f) + " takes " +
                                                std::to_string(expected) + " parameters");
    g.validate();
    return g;
}

KRule k_rule_from(const json& j) {
    if (j.is_number_integer()) return KRule::fixed_k(j.get<std::size_t>());
    check_keys(j, {"delta", "eta", "multiplier"}, "k");
    return KRule::power(j.value("delta", 0.5), j.value("eta", 0.0), j.value("multiplier", 1.0));
}

std::vector<Method> methods_from(const json& j) {
    std::vector<Method> out;
    for (const auto& m : j) out.push_back(parse_method(m.get<std::string>()));
    if (out.empty()) throw DomainError("methods must not be empty");
    return out;
}

SamplerConfig sampler_from(const json& j, SamplerConfig s) {
    check_keys(j, {"burn_in", "draws", "thin"}, "sampler");
    s.burn_in = j.value("burn_in", s.burn_in);
    s.draws = j.value("draws", s.draws);
    s.thin = j.value("thin", s.thin);
    return s;
}

json methods_json(const std::vector<Method>& ms) {
    json out = json::array();
    for (Method m : ms) out.push_back(method_name(m));
    return out;
}

ExperimentConfig experiment_from(const json& j) {
    check_keys(j, {"experiment", "generator", "n", "k", "tau_star", "c", "alpha", "replications", "methods", "seed",
                   "sampler", "mixture_draws", "n_ladder", "tau_star_ladder", "relative_tolerance"},
               "experiment config");
    ExperimentConfig c;
    if (j.contains("generator")) c.generator = generator_from(j.at("generator"));
    c.n = j.value("n", c.n);
    if (j.contains("k")) c.k_rule = k_rule_from(j.at("k"));
    c.tau_star = j.value("tau_star", c.tau_star);
    if (j.contains("c")) c.c = j.at("c").get<double>();
    c.alpha = j.value("alpha", c.alpha);
    c.replications = j.value("replications", c.replications);
    if (j.contains("methods")) c.methods = methods_from(j.at("methods"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("sampler")) c.sampler = sampler_from(j.at("sampler"), c.sampler);
    c.mixture_draws = j.value("mixture_draws", c.mixture_draws);
    c.n_ladder = j.value("n_ladder", c.n_ladder);
    c.tau_star_ladder = j.value("tau_star_ladder", c.tau_star_ladder);
    c.relative_tolerance = j.value("relative_tolerance", c.relative_tolerance);
    c.validate();
    return c;
}

TsCoverageConfig ts_experiment_from(const json& j) {
    check_keys(j, {"experiment", "innovations", "phi", "window", "stride", "origins", "k", "tau_e", "alpha", "methods",
                   "seed", "sampler"},
               "experiment config");
    TsCoverageConfig c;
    if (j.contains("innovations")) c.innovations = generator_from(j.at("innovations"));
    c.phi = j.value("phi", c.phi);
    c.window = j.value("window", c.window);
    c.stride = j.value("stride", c.stride);
    c.origins = j.value("origins", c.origins);
    c.k = j.value("k", c.k);
    c.tau_e = j.value("tau_e", c.tau_e);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("methods")) c.methods = methods_from(j.at("methods"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("sampler")) c.sampler = sampler_from(j.at("sampler"), c.sampler);
    c.validate();
    return c;
}

json experiment_echo(const ExperimentConfig& c) {
    return json{{"generator", c.generator.describe()},
                {"true_gamma", number(c.generator.true_gamma())},
                {"n", c.n},
                {"k_rule", c.k_rule.describe()},
                {"tau_star", c.effective_tau_star()},
                {"alpha", c.alpha},
                {"replications", c.replications},
                {"methods", methods_json(c.methods)},
                {"seed", c.seed}};
}

int cmd_simulate(const Command& cmd, Options& o, const Runner& r) {
    if (o.config.empty()) throw DomainError("--config is required");
    json j = load_json(o.config);
    if (!j.is_object() || !j.contains("experiment")) throw DomainError(o.config + ": missing 'experiment'");
    if (cmd.given("seed")) j["seed"] = o.seed;
    const std::string kind = j.at("experiment").get<std::string>();
    json rep{{"command", "simulate"}, {"experiment", kind}};
    std::function<void(std::ostream&)> table;

    if (kind == "ts_coverage") {
        const TsCoverageConfig c = ts_experiment_from(j);
        const auto res = std::make_shared<TsCoverageResult>(ts_coverage_experiment(c));
        rep["config"] = json{{"innovations", c.innovations.describe()}, {"phi", c.phi}, {"window", c.window},
                             {"stride", c.stride}, {"origins", c.origins}, {"k", c.k}, {"tau_e", c.tau_e}, {"alpha", c.alpha},
                             {"methods", methods_json(c.methods)}, {"seed", c.seed}};
        json arms = json::array();
        for (const TsArm& a : res->arms)
            arms.push_back(json{{"arm", a.arm}, {"used", a.used}, {"failures", a.failures},
                                {"violation_rate", a.violation_rate}, {"se", a.se},
                                {"mean_true_mass", a.mean_true_mass}});
        rep["arms"] = arms;
        table = [res](std::ostream& os) { write_coverage_csv(os, res->rows); };
    } else {
        const ExperimentConfig c = experiment_from(j);
        rep["config"] = experiment_echo(c);
        if (kind == "coverage") {
            const auto res = std::make_shared<CoverageResult>(coverage_experiment(c));
            rep["n"] = res->n;
            rep["k"] = res->k;
            rep["tau_star"] = res->tau_star;
            rep["tau_e"] = res->tau_e;
            json arms = json::array();
            for (const ArmCoverage& a : res->arms)
                arms.push_back(json{{"arm", a.arm}, {"used", a.used}, {"failures", a.failures},
                                    {"fallbacks", a.fallbacks}, {"coverage", a.coverage}, {"se", a.se},
                                    {"mean_true_mass", a.mean_true_mass}, {"mean_width", a.mean_width}});
            rep["arms"] = arms;
            table = [res](std::ostream& os) { write_coverage_csv(os, res->rows); };
        } else if (kind == "contraction") {
            const auto rows = std::make_shared<std::vector<ContractionRow>>(contraction_experiment(c));
            json jr = json::array();
            for (const auto& x : *rows)
                jr.push_back(json{{"n", x.n}, {"k", x.k}, {"tau_star", x.tau_star}, {"arm", x.arm},
                                  {"median", x.median}, {"lower_quartile", x.lower_quartile},
                                  {"upper_quartile", x.upper_quartile}, {"used", x.used}, {"failures", x.failures}});
            rep["rows"] = jr;
            table = [rows](std::ostream& os) { write_contraction_csv(os, *rows); };
        } else if (kind == "tail") {
            const auto rows = std::make_shared<std::vector<TailRow>>(tail_equivalence_experiment(c));
            json jr = json::array();
            for (const auto& x : *rows)
                jr.push_back(json{{"n", x.n}, {"k", x.k}, {"tau_star", x.tau_star}, {"arm", x.arm},
                                  {"median", number(x.median)}, {"band_lower", number(x.band_lower)},
                                  {"band_upper", number(x.band_upper)}, {"used", x.used}, {"failures", x.failures}});
            rep["rows"] = jr;
            table = [rows](std::ostream& os) { write_tail_csv(os, *rows); };
        } else if (kind == "risk") {
            const auto rows = std::make_shared<std::vector<RiskRow>>(risk_experiment(c));
            json jr = json::array();
            for (const auto& x : *rows)
                jr.push_back(json{{"n", x.n}, {"k", x.k}, {"tau_e", x.tau_e}, {"arm", x.arm},
                                  {"true_var", x.true_var}, {"true_es", number(x.true_es)},
                                  {"median_var_error", number(x.median_var_error)},
                                  {"median_es_error", number(x.median_es_error)}, {"var_within", x.var_within},
                                  {"es_within", number(x.es_within)}, {"used", x.used}, {"es_used", x.es_used},
                                  {"failures", x.failures}});
            rep["rows"] = jr;
            table = [rows](std::ostream& os) { write_risk_csv(os, *rows); };
        } else {
            throw DomainError("unknown experiment '" + kind + "' (coverage, contraction, tail, risk, ts_coverage)");
        }
    }
    if (!o.table.empty()) write_file_atomic(o.table, table);
    r.emit_report(rep, table);
    return kOk;
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Io: return kIoFailure;
        case ErrorKind::Domain: return kValidation;
        case ErrorKind::Numeric: return kNumericFailure;
    }
    return kNumericFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Peaks-over-threshold predictive inference"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");

    std::vector<std::unique_ptr<Command>> commands;
    const auto add = [&](const char* name, const char* help) -> Command& {
        commands.push_back(std::make_unique<Command>());
        Command& c = *commands.back();
        c.app = app.add_subcommand(name, help);
        return c;
    };
    const auto data_opts = [&](Command& c) {
        add_bound(c, "input", o.input, "Single-column CSV");
        add_bound(c, "out", o.out, "Output file (default: standard output)");
        add_bound(c, "format", o.format, "json or csv");
        add_bound(c, "method", o.method, "ml, pwm or bayes");
        add_bound(c, "alpha", o.alpha, "Interval level 1 - alpha");
        add_bound(c, "seed", o.seed, "Root seed");
        add_bound(c, "burn-in", o.burn_in, "Sampler burn-in");
        add_bound(c, "draws", o.draws, "Posterior draws kept");
        add_bound(c, "thin", o.thin, "Sampler thinning");
        add_bound(c, "config", o.config, "JSON file with option values");
    };

    Command& fit = add("fit", "Fit the GP tail above X_{n-k,n}");
    data_opts(fit);
    add_bound(fit, "k", o.k, "Effective sample size");
    fit.run = [&] { return cmd_fit(fit, o, Runner(o, out)); };

    Command& predict = add("predict", "Predictive law, levels and interval at an extreme level");
    data_opts(predict);
    add_bound(predict, "k", o.k, "Effective sample size");
    add_bound(predict, "tau-e", o.tau_e, "Extreme level");
    add_bound(predict, "c", o.c, "Endpoint-gap factor (negative shape only)");
    add_bound(predict, "return-period", o.return_period, "Return period T");
    add_bound(predict, "grid", o.grid, "Write a (y, pdf, cdf) grid CSV here");
    add_bound(predict, "grid-points", o.grid_points, "Grid size");
    predict.run = [&] { return cmd_predict(predict, o, Runner(o, out)); };

    Command& risk = add("risk", "VaR and expected shortfall at an extreme level");
    data_opts(risk);
    add_bound(risk, "k", o.k, "Effective sample size");
    add_bound(risk, "tau-e", o.tau_e, "Extreme level");
    risk.run = [&] { return cmd_risk(risk, o, Runner(o, out)); };

    Command& ts = add("ts", "Rolling one-step-ahead conditional forecasts");
    data_opts(ts);
    add_bound(ts, "k", o.k, "Residual exceedances per window");
    add_bound(ts, "tau-e", o.tau_e, "Extreme level");
    add_bound(ts, "window", o.window, "Window length");
    add_bound(ts, "stride", o.stride, "Distance between origins");
    add_bound(ts, "filter", o.filter, "ar, garch11 or external");
    add_bound(ts, "ar-order", o.ar_order, "AR order");
    ts.run = [&] { return cmd_ts(ts, o, Runner(o, out)); };

    Command& trace = add("trace", "Shape estimates across a range of k");
    data_opts(trace);
    add_bound(trace, "k-min", o.k_min, "Smallest k");
    add_bound(trace, "k-max", o.k_max, "Largest k");
    add_bound(trace, "k-step", o.k_step, "Step in k");
    trace.run = [&] { return cmd_trace(trace, o, Runner(o, out)); };

    Command& levels = add("return-levels", "Return levels and intervals over return periods");
    data_opts(levels);
    add_bound(levels, "k", o.k, "Effective sample size of the point forecast");
    add_bound(levels, "periods", o.periods, "Return periods")->delimiter(',');
    levels.run = [&] { return cmd_return_levels(levels, o, Runner(o, out)); };

    Command& simulate = add("simulate", "Run a simulation experiment from a JSON config");
    simulate.app->add_option("--config", o.config, "Experiment config");
    simulate.bindings["seed"] = {simulate.app->add_option("--seed", o.seed, "Override the config seed"), {}};
    simulate.app->add_option("--out", o.out, "Summary (or table with --format csv) output file");
    simulate.app->add_option("--format", o.format, "json or csv");
    simulate.app->add_option("--table", o.table, "Also write the result table CSV here");
    simulate.run = [&] { return cmd_simulate(simulate, o, Runner(o, out)); };

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kOk : kValidation;
        }
        for (auto& c : commands) {
            if (!c->app->parsed()) continue;
            if (c.get() != &simulate && c->given("config")) apply_config(*c, o.config);
            check_common(o);
            return c->run();
        }
        return kValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericFailure;
    }
}

}  // namespace potpred::cli
