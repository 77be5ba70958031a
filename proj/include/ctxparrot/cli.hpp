#pragma once

// Command-line driver. Flags and config-file entries both land in the same
// key/value form and go through one parser, so validation is identical for
// both and every problem is reported in a single pass. Config-file entries
// override flags.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxparrot/core.hpp"
#include "ctxparrot/dynsys.hpp"
#include "ctxparrot/experiments.hpp"
#include "ctxparrot/forecasters.hpp"
#include "ctxparrot/io.hpp"
#include "ctxparrot/metrics.hpp"
#include "ctxparrot/svg.hpp"
#include "ctxparrot/systems.hpp"

namespace ctxparrot::cli {

using io::json;
namespace fs = std::filesystem;

inline constexpr const char *kOutEnv = "CTXPARROT_OUT";

struct RunConfig {
    std::string command;
    std::string system = "lorenz";
    std::vector<std::string> systems;
    std::string input;
    std::string method = "parrot";
    std::vector<std::string> methods;
    std::size_t D = 5;
    std::size_t H = 300;
    std::size_t L = 512;
    std::optional<std::size_t> exclusion;
    std::vector<std::size_t> context_lengths;
    std::size_t seeds = 20;
    std::size_t n = 100'000;
    std::optional<std::size_t> start;
    double ppl = 30.0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t k = 5;
    double bandwidth = 0.5;
    double theta = 2.0;
    std::size_t trajectory_length = 100'000;
    std::size_t dcor_points = 100'000;
    bool kl = true;
    bool corr_dim = false;
    double vpt_threshold = 30.0;
    std::size_t threads = 0;
    bool plot = true;
    std::string config_file;

    /// Keys given on the command line or in the config file.
    std::set<std::string> explicit_keys;
    bool is_set(const std::string &key) const { return explicit_keys.count(key) > 0; }
};

// ---------------------------------------------------------------------------
// Key/value parsing

namespace detail {

inline std::string canonical_key(std::string key) {
    for (auto &c : key)
        if (c == '-') c = '_';
    static const std::map<std::string, std::string> aliases = {
        {"context_length", "L"}, {"embed_dim", "D"},      {"horizon", "H"},
        {"master_seed", "seed"}, {"noise_level", "noise"}, {"points_per_lyapunov", "ppl"},
    };
    if (auto it = aliases.find(key); it != aliases.end()) return it->second;
    return key;
}

inline std::vector<std::string> list_items(const std::string &v) {
    std::vector<std::string> out;
    for (auto &item : io::split(v, ',')) {
        auto t = io::trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline bool parse_size(const std::string &v, std::size_t &out) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) return false;
    try {
        out = static_cast<std::size_t>(std::stoull(v));
    } catch (const std::exception &) {
        return false;
    }
    return true;
}

inline bool parse_real(const std::string &v, double &out) {
    try {
        std::size_t used = 0;
        out = std::stod(v, &used);
        return used == v.size() && std::isfinite(out);
    } catch (const std::exception &) {
        return false;
    }
}

inline bool parse_bool(const std::string &v, bool &out) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    return false;
}

} // namespace detail

/// Applies one key/value pair; problems are appended to errs with `where` as prefix.
inline void apply_entry(RunConfig &cfg, const std::string &raw_key, const std::string &raw_value,
                        const std::string &where, std::vector<std::string> &errs) {
    const std::string key = detail::canonical_key(io::trim(raw_key));
    const std::string v = io::trim(raw_value);
    auto bad = [&](const std::string &what) { errs.push_back(where + key + ": '" + v + "' is not " + what); };
    auto size_field = [&](std::size_t &dst) {
        if (!detail::parse_size(v, dst)) bad("a non-negative integer");
    };
    auto real_field = [&](double &dst) {
        if (!detail::parse_real(v, dst)) bad("a finite number");
    };
    auto bool_field = [&](bool &dst) {
        if (!detail::parse_bool(v, dst)) bad("a boolean");
    };

    if (key == "system") cfg.system = v;
    else if (key == "systems") cfg.systems = detail::list_items(v);
    else if (key == "input") cfg.input = v;
    else if (key == "method") cfg.method = v;
    else if (key == "methods") cfg.methods = detail::list_items(v);
    else if (key == "D") size_field(cfg.D);
    else if (key == "H") size_field(cfg.H);
    else if (key == "L") size_field(cfg.L);
    else if (key == "exclusion") {
        std::size_t e = 0;
        if (detail::parse_size(v, e)) cfg.exclusion = e;
        else bad("a non-negative integer");
    } else if (key == "context_lengths") {
        cfg.context_lengths.clear();
        for (const auto &item : detail::list_items(v)) {
            std::size_t L = 0;
            if (detail::parse_size(item, L)) cfg.context_lengths.push_back(L);
            else errs.push_back(where + "context_lengths: '" + item + "' is not a non-negative integer");
        }
    } else if (key == "seeds") size_field(cfg.seeds);
    else if (key == "n") size_field(cfg.n);
    else if (key == "start") {
        std::size_t s = 0;
        if (detail::parse_size(v, s)) cfg.start = s;
        else bad("a non-negative integer");
    } else if (key == "ppl") real_field(cfg.ppl);
    else if (key == "noise") real_field(cfg.noise);
    else if (key == "seed") {
        std::size_t s = 0;
        if (detail::parse_size(v, s)) cfg.seed = s;
        else bad("a non-negative integer");
    } else if (key == "out") cfg.out = v;
    else if (key == "k") size_field(cfg.k);
    else if (key == "bandwidth") real_field(cfg.bandwidth);
    else if (key == "theta") real_field(cfg.theta);
    else if (key == "trajectory_length") size_field(cfg.trajectory_length);
    else if (key == "dcor_points") size_field(cfg.dcor_points);
    else if (key == "kl") bool_field(cfg.kl);
    else if (key == "corr_dim") bool_field(cfg.corr_dim);
    else if (key == "vpt_threshold") real_field(cfg.vpt_threshold);
    else if (key == "threads") size_field(cfg.threads);
    else if (key == "plot") bool_field(cfg.plot);
    else {
        errs.push_back(where + "unknown key '" + raw_key + "'");
        return;
    }
    cfg.explicit_keys.insert(key);
}

/// Config file: `key = value` lines, `#` starts a comment, lists are comma-separated.
inline void apply_config_text(RunConfig &cfg, const std::string &text, const std::string &origin,
                              std::vector<std::string> &errs) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (io::trim(line).empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errs.push_back(where + "expected 'key = value'");
            continue;
        }
        apply_entry(cfg, line.substr(0, eq), line.substr(eq + 1), where, errs);
    }
}

/// Fills command-specific defaults for keys nobody set.
inline void resolve_defaults(RunConfig &cfg) {
    const bool study = cfg.command == "sweep" || cfg.command == "scaling";
    if (cfg.systems.empty() && study) cfg.systems = systems::builtin_names();
    if (cfg.methods.empty()) cfg.methods = {"parrot", "mean", "naive"};
    if (cfg.context_lengths.empty()) {
        if (cfg.command == "invariants") cfg.context_lengths = {100, 500, 3000};
        else cfg.context_lengths = {200, 500, 1000, 2000, 5000, 10000};
    }
    if (cfg.command == "invariants") {
        if (!cfg.is_set("seeds")) cfg.seeds = 10;
        if (!cfg.is_set("H")) cfg.H = 10'000;
    }
    if (cfg.command == "scaling" && !cfg.is_set("D")) cfg.D = 10;
    if (cfg.command == "forecast" && !cfg.is_set("n")) cfg.n = cfg.start.value_or(0) + cfg.L + cfg.H;
    if (cfg.out.empty()) {
        const char *root = std::getenv(kOutEnv);
        cfg.out = (fs::path(root && *root ? root : "ctxparrot_out") / cfg.command).string();
    }
}

inline std::vector<std::string> validate(const RunConfig &cfg) {
    std::vector<std::string> errs;
    if (!(cfg.ppl > 0.0)) errs.push_back("ppl must be > 0");
    if (cfg.noise < 0.0) errs.push_back("noise must be >= 0");
    if (cfg.D == 0) errs.push_back("D must be >= 1");
    if (cfg.H == 0) errs.push_back("H must be >= 1");
    if (!(cfg.bandwidth > 0.0)) errs.push_back("bandwidth must be > 0");
    if (cfg.theta < 0.0) errs.push_back("theta must be >= 0");
    if (cfg.k == 0) errs.push_back("k must be >= 1");
    const bool needs_system = cfg.command == "simulate" || cfg.command == "invariants" ||
                              (cfg.command == "forecast" && cfg.input.empty());
    if (needs_system) {
        try {
            systems::find(cfg.system);
        } catch (const InvalidArgument &e) {
            errs.emplace_back(e.what());
        }
    }
    if (cfg.command == "simulate" && cfg.n == 0) errs.push_back("n must be >= 1");
    if (cfg.command == "evaluate" && cfg.input.empty()) errs.push_back("evaluate needs --input <forecast.csv>");
    auto check_method = [&](const std::string &m) {
        try {
            parse_method(m);
        } catch (const InvalidArgument &e) {
            errs.emplace_back(e.what());
        }
    };
    if (cfg.command == "forecast") {
        check_method(cfg.method);
        EmbedParams p{cfg.D, cfg.H, cfg.exclusion};
        if (cfg.L < p.min_context())
            errs.push_back("L=" + std::to_string(cfg.L) + " is below 2*D + exclusion = " +
                           std::to_string(p.min_context()));
    }
    if (cfg.command == "sweep")
        for (const auto &m : cfg.methods) check_method(m);
    if (cfg.command == "scaling" || cfg.command == "invariants") {
        const std::size_t excl = cfg.exclusion.value_or(cfg.D);
        for (std::size_t L : cfg.context_lengths)
            if (L < 2 * cfg.D + excl)
                errs.push_back("cell L=" + std::to_string(L) + ": context shorter than 2*D + exclusion = " +
                               std::to_string(2 * cfg.D + excl));
    }
    if (cfg.command == "scaling" && cfg.context_lengths.size() < 4)
        errs.push_back("scaling needs at least 4 context lengths for a power-law fit");
    if ((cfg.command == "sweep" || cfg.command == "scaling" || cfg.command == "invariants") && cfg.seeds == 0)
        errs.push_back("seeds must be >= 1");
    return errs;
}

inline void throw_errors(const std::vector<std::string> &errs, const std::string &heading) {
    if (errs.empty()) return;
    std::string msg = heading;
    for (const auto &e : errs) msg += "\n  - " + e;
    throw InvalidArgument(msg);
}

inline json to_json(const RunConfig &cfg) {
    json j;
    j["command"] = cfg.command;
    j["system"] = cfg.system;
    j["systems"] = cfg.systems;
    j["input"] = cfg.input;
    j["method"] = cfg.method;
    j["methods"] = cfg.methods;
    j["D"] = cfg.D;
    j["H"] = cfg.H;
    j["L"] = cfg.L;
    j["exclusion"] = cfg.exclusion.value_or(cfg.D);
    j["context_lengths"] = cfg.context_lengths;
    j["seeds"] = cfg.seeds;
    j["n"] = cfg.n;
    j["start"] = cfg.start ? json(*cfg.start) : json(nullptr);
    j["ppl"] = cfg.ppl;
    j["noise"] = cfg.noise;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out;
    j["k"] = cfg.k;
    j["bandwidth"] = cfg.bandwidth;
    j["theta"] = cfg.theta;
    j["trajectory_length"] = cfg.trajectory_length;
    j["dcor_points"] = cfg.dcor_points;
    j["kl"] = cfg.kl;
    j["corr_dim"] = cfg.corr_dim;
    j["vpt_threshold"] = cfg.vpt_threshold;
    j["threads"] = cfg.threads;
    j["plot"] = cfg.plot;
    return j;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Hash of the resolved config, excluding keys that cannot change results.
inline std::string config_hash(const RunConfig &cfg) {
    auto j = to_json(cfg);
    j.erase("out");
    j.erase("threads");
    j.erase("plot");
    return hex64(fnv1a(j.dump()));
}

inline json manifest(const RunConfig &cfg, json extra = json::object()) {
    json m;
    m["command"] = cfg.command;
    m["config"] = to_json(cfg);
    m["config_hash"] = config_hash(cfg);
    m["master_seed"] = cfg.seed;
    for (auto &[k, v] : extra.items()) m[k] = v;
    return m;
}

inline void write_manifest(const RunConfig &cfg, json extra = json::object()) {
    io::atomic_write(fs::path(cfg.out) / "manifest.json", manifest(cfg, std::move(extra)).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Library-facing conversions

inline MethodSpec method_spec(const RunConfig &cfg, const std::string &name) {
    MethodSpec m;
    m.method = parse_method(name);
    m.k = cfg.k;
    m.bandwidth = cfg.bandwidth;
    m.theta = cfg.theta;
    return m;
}

inline EvalOptions eval_options(const RunConfig &cfg) {
    EvalOptions e;
    e.points_per_lyapunov = cfg.ppl;
    e.vpt_threshold = cfg.vpt_threshold;
    e.attractor_kl = cfg.kl;
    e.correlation_dims = cfg.corr_dim;
    e.kl.seed = cfg.seed;
    e.corr_dim.seed = cfg.seed;
    return e;
}

inline SweepConfig sweep_config(const RunConfig &cfg) {
    SweepConfig s;
    s.systems = cfg.systems;
    s.methods.clear();
    for (const auto &m : cfg.methods) s.methods.push_back(method_spec(cfg, m));
    s.context_lengths = cfg.context_lengths;
    s.seeds = cfg.seeds;
    s.embed = {cfg.D, cfg.H, cfg.exclusion};
    s.points_per_lyapunov = cfg.ppl;
    s.trajectory_length = cfg.trajectory_length;
    s.noise_level = cfg.noise;
    s.master_seed = cfg.seed;
    s.eval = eval_options(cfg);
    s.threads = cfg.threads;
    return s;
}

inline ScalingConfig scaling_config(const RunConfig &cfg) {
    ScalingConfig s;
    s.systems = cfg.systems;
    s.context_lengths = cfg.context_lengths;
    s.seeds = cfg.seeds;
    s.D = cfg.D;
    s.points_per_lyapunov = cfg.ppl;
    s.trajectory_length = cfg.trajectory_length;
    s.dcor_points = cfg.dcor_points;
    s.master_seed = cfg.seed;
    s.threads = cfg.threads;
    return s;
}

inline InvariantConfig invariant_config(const RunConfig &cfg) {
    InvariantConfig c;
    c.system = cfg.system;
    c.context_lengths = cfg.context_lengths;
    c.horizon = cfg.H;
    c.seeds = cfg.seeds;
    c.D = cfg.D;
    c.points_per_lyapunov = cfg.ppl;
    c.master_seed = cfg.seed;
    c.threads = cfg.threads;
    return c;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_simulate(const RunConfig &cfg) {
    const auto spec = systems::find(cfg.system);
    auto ts = sample_trajectory(spec, cfg.ppl, cfg.n, cfg.seed);
    ts = add_gaussian_noise(std::move(ts), cfg.noise, derive_seed(cfg.seed, fnv1a("noise")));
    io::TrajectoryMeta meta{spec.name, spec.reference_lle, ts.dt, cfg.ppl, cfg.seed, ts.normalized, cfg.noise};
    io::write_trajectory(fs::path(cfg.out) / "trajectory.csv", ts, meta);
    write_manifest(cfg);
    return 0;
}

/// Context/truth split of a forecast run; shared with tests.
struct ForecastSetup {
    TimeSeries series;
    std::size_t start = 0;
    Matrix context;
    std::optional<Matrix> truth;
};

inline ForecastSetup forecast_setup(const RunConfig &cfg) {
    ForecastSetup fs_;
    if (!cfg.input.empty()) {
        fs_.series = io::read_trajectory(cfg.input);
        if (cfg.is_set("ppl") || fs_.series.points_per_lyapunov <= 0.0) fs_.series.points_per_lyapunov = cfg.ppl;
    } else {
        fs_.series = sample_trajectory(systems::find(cfg.system), cfg.ppl, cfg.n, cfg.seed);
        fs_.series = add_gaussian_noise(std::move(fs_.series), cfg.noise, derive_seed(cfg.seed, fnv1a("noise")));
    }
    const std::size_t rows = fs_.series.size();
    require(rows >= cfg.L, "context length L=" + std::to_string(cfg.L) + " exceeds the " + std::to_string(rows) +
                               " rows of the input");
    if (cfg.start) {
        require(*cfg.start + cfg.L <= rows, "start + L exceeds the input length");
        fs_.start = *cfg.start;
    } else {
        fs_.start = rows >= cfg.L + cfg.H ? rows - cfg.L - cfg.H : rows - cfg.L;
    }
    fs_.context = fs_.series.values.slice_rows(fs_.start, cfg.L);
    if (fs_.start + cfg.L + cfg.H <= rows) fs_.truth = fs_.series.values.slice_rows(fs_.start + cfg.L, cfg.H);
    return fs_;
}

inline std::string forecast_svg(const ForecastSetup &setup, const MultiForecast &fc, const RunConfig &cfg) {
    svg::Plot plot;
    plot.title = "forecast (" + cfg.method + "), dimension 0";
    plot.xlabel = "time index";
    plot.ylabel = "value";
    const std::size_t L = setup.context.rows();
    svg::Series ctx{"context", {}, {}, "#444444"};
    for (std::size_t i = 0; i < L; ++i) {
        ctx.x.push_back(static_cast<double>(i));
        ctx.y.push_back(setup.context(i, 0));
    }
    plot.series.push_back(ctx);
    if (setup.truth) {
        svg::Series tr{"truth", {}, {}, "#1f77b4"};
        for (std::size_t i = 0; i < setup.truth->rows(); ++i) {
            tr.x.push_back(static_cast<double>(L + i));
            tr.y.push_back((*setup.truth)(i, 0));
        }
        plot.series.push_back(tr);
    }
    svg::Series pr{"prediction", {}, {}, "#d62728", true};
    for (std::size_t i = 0; i < fc.prediction.rows(); ++i) {
        pr.x.push_back(static_cast<double>(L + i));
        pr.y.push_back(fc.prediction(i, 0));
    }
    plot.series.push_back(pr);
    if (const auto &r = fc.per_dim.front(); r.s_opt) {
        const double s = static_cast<double>(*r.s_opt);
        plot.bands.push_back({s - static_cast<double>(cfg.D), s, "matched motif"});
        plot.legend_notes.push_back("matched motif ends at s=" + std::to_string(*r.s_opt));
    }
    return plot.render();
}

inline int cmd_forecast(const RunConfig &cfg) {
    const auto setup = forecast_setup(cfg);
    const EmbedParams p{cfg.D, cfg.H, cfg.exclusion};
    const auto fc = forecast_each_dimension(setup.context, p, method_spec(cfg, cfg.method));
    const fs::path out(cfg.out);
    io::atomic_write(out / "forecast.csv",
                     io::forecast_csv(fc.prediction, setup.truth ? &*setup.truth : nullptr, setup.series.dt));

    json dims = json::array();
    for (const auto &r : fc.per_dim) {
        json d;
        d["s_opt"] = r.s_opt ? json(*r.s_opt) : json(nullptr);
        d["match_distance"] = r.match_distance ? json(*r.match_distance) : json(nullptr);
        d["weights_entropy"] = r.weights_entropy ? json(*r.weights_entropy) : json(nullptr);
        d["note"] = r.note;
        dims.push_back(d);
    }
    json prov;
    prov["source"] = setup.series.source;
    prov["start"] = setup.start;
    prov["dt"] = setup.series.dt;
    prov["points_per_lyapunov"] = setup.series.points_per_lyapunov;
    prov["method"] = cfg.method;
    prov["has_truth"] = setup.truth.has_value();
    prov["dimensions"] = dims;
    prov["config_hash"] = config_hash(cfg);
    io::atomic_write(out / "forecast.json", prov.dump(2) + "\n");
    if (cfg.plot) io::atomic_write(out / "forecast.svg", forecast_svg(setup, fc, cfg));
    write_manifest(cfg);
    return 0;
}

inline int cmd_evaluate(const RunConfig &cfg) {
    const fs::path in(cfg.input);
    const auto table = io::read_forecast(in);
    require(table.has_truth, cfg.input + ": the forecast has no truth column to evaluate against");
    auto eval = eval_options(cfg);
    const fs::path prov = in.parent_path() / "forecast.json";
    if (!cfg.is_set("ppl") && fs::exists(prov)) {
        const auto j = json::parse(io::read_file(prov));
        eval.points_per_lyapunov = j.value("points_per_lyapunov", cfg.ppl);
    }
    const auto reports = evaluate_forecast(table.truth, table.pred, eval);
    json j;
    j["input"] = cfg.input;
    j["points_per_lyapunov"] = eval.points_per_lyapunov;
    j["metrics"] = json::array();
    for (const auto &r : reports) j["metrics"].push_back(io::to_json(r));
    io::atomic_write(fs::path(cfg.out) / "metrics.json", j.dump(2) + "\n");
    write_manifest(cfg);
    return 0;
}

inline std::string sweep_svg(const std::vector<SweepResult> &results, const RunConfig &cfg) {
    svg::Plot plot;
    plot.title = "median rolling sMAPE at one Lyapunov time";
    plot.xlabel = "context length L";
    plot.ylabel = "sMAPE (median over systems)";
    plot.logx = plot.logy = true;
    const auto cells = summarize(results, "smape_1tau");
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const auto name = to_string(parse_method(cfg.methods[mi]));
        svg::Series s{name, {}, {}, svg::palette()[mi % svg::palette().size()]};
        s.markers = true;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t L : cfg.context_lengths) {
            std::vector<double> med;
            for (const auto &sys : cfg.systems)
                if (auto it = cells.find({sys, L, name}); it != cells.end()) med.push_back(it->second.median);
            if (med.empty()) continue;
            s.x.push_back(static_cast<double>(L));
            s.y.push_back(stats::median(med));
            pts.emplace_back(static_cast<double>(L), s.y.back());
        }
        if (pts.size() >= 4 && std::all_of(pts.begin(), pts.end(), [](auto &p) { return p.second > 0; })) {
            const auto fit = fit_power_law(pts);
            char buf[64];
            std::snprintf(buf, sizeof buf, " (alpha=%.3f, r2=%.3f)", fit.alpha, fit.r_squared);
            s.label += buf;
        }
        plot.series.push_back(std::move(s));
    }
    return plot.render();
}

inline int cmd_sweep(const RunConfig &cfg) {
    const auto sw = sweep_config(cfg);
    throw_errors(ctxparrot::validate(sw), "invalid sweep configuration:");
    const auto results = run_sweep(sw);
    const fs::path out(cfg.out);
    io::atomic_write(out / "results.csv", io::sweep_csv(results));
    if (cfg.plot) io::atomic_write(out / "summary.svg", sweep_svg(results, cfg));
    write_manifest(cfg, json{{"records", results.size()}});
    return 0;
}

inline std::string scaling_csv(const ScalingStudy &study) {
    std::string out = "system,alpha_e,r2_e,alpha_ell,r2_ell,d_cor,e_ell_correlation,e_ell_ratio\n";
    for (const auto &r : study.rows)
        out += r.system + ',' + io::fmt(r.fit_e.alpha) + ',' + io::fmt(r.fit_e.r_squared) + ',' +
               io::fmt(r.fit_ell.alpha) + ',' + io::fmt(r.fit_ell.r_squared) + ',' + io::fmt(r.d_cor) + ',' +
               io::fmt(r.e_ell_correlation) + ',' + io::fmt(r.e_ell_ratio) + '\n';
    return out;
}

inline std::string scaling_svg(const ScalingStudy &study) {
    svg::Plot plot;
    plot.title = "one-step error vs context length";
    plot.xlabel = "context length L";
    plot.ylabel = "mean one-step sMAPE";
    plot.logx = plot.logy = true;
    plot.height = std::max(450.0, 60.0 + 18.0 * static_cast<double>(study.rows.size() + 2));
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        const auto &r = study.rows[i];
        const auto color = svg::palette()[i % svg::palette().size()];
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s alpha=%.3f r2=%.3f", r.system.c_str(), r.fit_e.alpha, r.fit_e.r_squared);
        svg::Series pts{buf, {}, {}, color};
        pts.markers = true;
        pts.line = false;
        svg::Series fit{"", {}, {}, color, true};
        for (std::size_t j = 0; j < study.context_lengths.size(); ++j) {
            const double L = static_cast<double>(study.context_lengths[j]);
            pts.x.push_back(L);
            pts.y.push_back(r.mean_e[j]);
            fit.x.push_back(L);
            fit.y.push_back(std::exp(r.fit_e.intercept - r.fit_e.alpha * std::log(L)));
        }
        plot.series.push_back(std::move(pts));
        plot.series.push_back(std::move(fit));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "Spearman(alpha, 1/d_cor)=%.3f", study.spearman_alpha_inv_dcor);
    plot.legend_notes.push_back(buf);
    return plot.render();
}

inline int cmd_scaling(const RunConfig &cfg) {
    const auto study = scaling_study(scaling_config(cfg));
    const fs::path out(cfg.out);
    io::atomic_write(out / "scaling.csv", scaling_csv(study));
    io::atomic_write(out / "results.csv", io::sweep_csv(study.records));
    if (cfg.plot) io::atomic_write(out / "scaling.svg", scaling_svg(study));
    write_manifest(cfg, json{{"spearman_alpha_inv_dcor", study.spearman_alpha_inv_dcor}});
    return 0;
}

inline int cmd_invariants(const RunConfig &cfg) {
    const auto study = invariant_convergence(invariant_config(cfg));
    const fs::path out(cfg.out);
    std::string rows = "L,median_hellinger_psd,median_d_cor_error,median_lyapunov_error,mean_hellinger_psd,"
                       "mean_d_cor_error,mean_lyapunov_error\n";
    for (const auto &r : study.rows)
        rows += std::to_string(r.L) + ',' + io::fmt(r.median_hellinger) + ',' + io::fmt(r.median_d_cor_error) + ',' +
                io::fmt(r.median_lyapunov_error) + ',' + io::fmt(r.mean_hellinger) + ',' +
                io::fmt(r.mean_d_cor_error) + ',' + io::fmt(r.mean_lyapunov_error) + '\n';
    std::string recs = "L,seed,period,hellinger_psd,d_cor_error,lyapunov_error\n";
    for (const auto &r : study.records)
        recs += std::to_string(r.L) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.period) + ',' +
                io::fmt(r.hellinger_psd) + ',' + io::fmt(r.d_cor_error) + ',' + io::fmt(r.lyapunov_error) + '\n';
    io::atomic_write(out / "invariants.csv", rows);
    io::atomic_write(out / "results.csv", recs);
    if (cfg.plot) {
        svg::Plot plot;
        plot.title = "long-horizon invariants, " + cfg.system;
        plot.xlabel = "context length L";
        plot.ylabel = "median error";
        plot.logx = true;
        svg::Series h{"Hellinger PSD", {}, {}, svg::palette()[0]}, d{"|d_cor error|", {}, {}, svg::palette()[1]},
            l{"|lyapunov error|", {}, {}, svg::palette()[2]};
        for (const auto &r : study.rows) {
            const double L = static_cast<double>(r.L);
            h.x.push_back(L), h.y.push_back(r.median_hellinger);
            d.x.push_back(L), d.y.push_back(r.median_d_cor_error);
            l.x.push_back(L), l.y.push_back(r.median_lyapunov_error);
        }
        for (auto *s : {&h, &d, &l}) s->markers = true;
        plot.series = {h, d, l};
        io::atomic_write(out / "invariants.svg", plot.render());
    }
    write_manifest(cfg);
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int dispatch(const RunConfig &cfg) {
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "forecast") return cmd_forecast(cfg);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg);
    if (cfg.command == "sweep") return cmd_sweep(cfg);
    if (cfg.command == "scaling") return cmd_scaling(cfg);
    if (cfg.command == "invariants") return cmd_invariants(cfg);
    throw InvalidArgument("unknown command '" + cfg.command + "'");
}

/// Parses argv into a resolved, validated config. Throws InvalidArgument
/// (all problems at once) or CLI::ParseError.
inline RunConfig parse_args(int argc, const char *const *argv) {
    CLI::App app{"Context parroting forecasts and benchmarks for chaotic systems", "ctxparrot"};
    app.require_subcommand(1);
    std::vector<std::pair<std::string, std::string>> raw;
    std::string config_file;

    struct Flag {
        const char *name;
        const char *key;
        const char *help;
    };
    static const Flag flags[] = {
        {"--system", "system", "built-in system name"},
        {"--systems", "systems", "comma-separated system names"},
        {"--input", "input", "input CSV (trajectory for forecast, forecast.csv for evaluate)"},
        {"--method", "method", "parrot|knn|simplex|smap|nw|mean|naive"},
        {"--methods", "methods", "comma-separated methods"},
        {"--context-length,-L", "L", "context length"},
        {"--context-lengths", "context_lengths", "comma-separated context lengths"},
        {"--embed-dim,-D", "D", "motif length"},
        {"--horizon,-H", "H", "forecast horizon"},
        {"--exclusion", "exclusion", "trailing motifs excluded from the search (default D)"},
        {"--seed", "seed", "master seed"},
        {"--seeds", "seeds", "number of seeds per cell"},
        {"--n", "n", "number of points to sample"},
        {"--start", "start", "first context row of the input"},
        {"--noise", "noise", "Gaussian observation noise level"},
        {"--ppl", "ppl", "points per Lyapunov time"},
        {"--out", "out", "output directory"},
        {"--k", "k", "knn neighbours"},
        {"--bandwidth", "bandwidth", "Gaussian kernel bandwidth"},
        {"--theta", "theta", "S-map nonlinearity"},
        {"--trajectory-length", "trajectory_length", "points per benchmark trajectory"},
        {"--dcor-points", "dcor_points", "points used for reference correlation dimensions"},
        {"--kl", "kl", "compute the attractor KL divergence (true|false)"},
        {"--corr-dim", "corr_dim", "compute correlation dimensions (true|false)"},
        {"--vpt-threshold", "vpt_threshold", "rolling sMAPE threshold for valid prediction time"},
        {"--threads", "threads", "worker threads (0 = all cores)"},
    };
    static const char *commands[][2] = {
        {"simulate", "sample a trajectory of a built-in system"},
        {"forecast", "forecast from a trajectory CSV or a built-in system"},
        {"evaluate", "score a forecast CSV"},
        {"sweep", "forecast benchmark over systems, context lengths and seeds"},
        {"scaling", "one-step error scaling with context length"},
        {"invariants", "long-horizon invariant convergence"},
    };
    std::string command;
    for (const auto &c : commands) {
        auto *sub = app.add_subcommand(c[0], c[1]);
        sub->callback([&command, name = std::string(c[0])] { command = name; });
        for (const auto &f : flags)
            sub->add_option_function<std::string>(
                f.name, [&raw, key = std::string(f.key)](const std::string &v) { raw.emplace_back(key, v); }, f.help);
        sub->add_option("--config", config_file, "key = value config file; entries override flags");
        sub->add_flag_callback("--no-plot", [&raw] { raw.emplace_back("plot", "false"); }, "skip SVG output");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) app.exit(e, std::cout, std::cerr);
        throw;
    }
    // Subcommand callbacks run after parsing, so fall back to the parsed list.
    if (command.empty())
        for (auto *sub : app.get_subcommands()) command = sub->get_name();

    RunConfig cfg;
    cfg.command = command;
    std::vector<std::string> errs;
    for (const auto &[k, v] : raw) apply_entry(cfg, k, v, "--", errs);
    if (!config_file.empty()) {
        cfg.config_file = config_file;
        try {
            apply_config_text(cfg, io::read_file(config_file), config_file, errs);
        } catch (const InvalidArgument &e) {
            errs.emplace_back(e.what());
        }
    }
    if (errs.empty()) {
        resolve_defaults(cfg);
        errs = validate(cfg);
    }
    throw_errors(errs, "invalid configuration:");
    return cfg;
}

/// Runs one invocation and maps failures onto the exit-code contract:
/// 0 success, 2 usage or validation, 3 numerical failure, 1 anything else.
inline int run(int argc, const char *const *argv, std::ostream &err = std::cerr) {
    try {
        return dispatch(parse_args(argc, argv));
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return 0;
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return 2;
    } catch (const InvalidArgument &e) {
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return 2;
    } catch (const NumericalError &e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception &e) {
        err << "failure: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ctxparrot::cli
