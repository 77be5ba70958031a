#pragma once

// Experiment drivers: context-length sweeps, power-law fits, the scaling
// study, long-horizon invariant convergence, and noise / granularity sweeps.
// Every result is a pure function of the config and its master seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ctxparrot/core.hpp"
#include "ctxparrot/dynsys.hpp"
#include "ctxparrot/forecasters.hpp"
#include "ctxparrot/metrics.hpp"
#include "ctxparrot/stats.hpp"
#include "ctxparrot/systems.hpp"

namespace ctxparrot {

// ---------------------------------------------------------------------------
// Method dispatch

enum class Method { parrot, knn, simplex, smap, nw, mean, naive };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::parrot: return "parrot";
    case Method::knn: return "knn";
    case Method::simplex: return "simplex";
    case Method::smap: return "smap";
    case Method::nw: return "nw";
    case Method::mean: return "mean";
    case Method::naive: return "naive";
    }
    return "?";
}

inline Method parse_method(const std::string &s) {
    for (Method m : {Method::parrot, Method::knn, Method::simplex, Method::smap, Method::nw, Method::mean,
                     Method::naive})
        if (to_string(m) == s) return m;
    if (s == "mean_baseline") return Method::mean;
    if (s == "naive_baseline") return Method::naive;
    throw InvalidArgument("unknown method '" + s + "' (expected parrot, knn, simplex, smap, nw, mean or naive)");
}

struct MethodSpec {
    Method method = Method::parrot;
    std::size_t k = 5;       ///< knn neighbours
    double bandwidth = 0.5;  ///< knn / nw Gaussian bandwidth
    double theta = 2.0;      ///< smap nonlinearity

    bool uses_motifs() const { return method != Method::mean && method != Method::naive; }
};

inline ForecastResult forecast_univariate(std::span<const double> context, const EmbedParams &p,
                                          const MethodSpec &m) {
    switch (m.method) {
    case Method::parrot: return parrot_forecast(context, p);
    case Method::knn: return knn_forecast(context, p, m.k, {KernelKind::gaussian, m.bandwidth, std::nullopt});
    case Method::simplex: return simplex_forecast(context, p);
    case Method::smap: return smap_forecast(context, p, m.theta);
    case Method::nw: return nw_forecast(context, p, {KernelKind::gaussian, m.bandwidth, std::nullopt});
    case Method::mean: return mean_baseline(context, p.H);
    case Method::naive: return naive_baseline(context, p.H);
    }
    throw InvalidArgument("unhandled method");
}

struct MultiForecast {
    Matrix prediction; ///< H x dim
    std::vector<ForecastResult> per_dim;
};

/// Univariate forecast of every column independently.
inline MultiForecast forecast_each_dimension(const Matrix &context, const EmbedParams &p, const MethodSpec &m) {
    MultiForecast out;
    out.prediction = Matrix(p.H, context.cols());
    for (std::size_t c = 0; c < context.cols(); ++c) {
        const auto col = context.column(c);
        auto r = forecast_univariate(col, p, m);
        for (std::size_t i = 0; i < p.H; ++i) out.prediction(i, c) = r.prediction[i];
        out.per_dim.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cell evaluation

struct EvalOptions {
    double points_per_lyapunov = 30.0;
    double vpt_threshold = 30.0;
    bool attractor_kl = true;
    bool correlation_dims = false;
    metrics::KlOptions kl;
    metrics::CorrDimOptions corr_dim;
};

/// Metrics of an H x dim forecast against the truth. Pointwise metrics are
/// computed per dimension and averaged uniformly; the KL divergence and
/// correlation dimensions use the joint point cloud.
inline std::vector<metrics::MetricReport> evaluate_forecast(const Matrix &truth, const Matrix &pred,
                                                            const EvalOptions &opt) {
    require(truth.rows() == pred.rows() && truth.cols() == pred.cols(), "evaluate_forecast: shape mismatch");
    require(truth.rows() >= 1, "evaluate_forecast: empty forecast");
    const std::size_t H = truth.rows(), dim = truth.cols();
    const double ppl = opt.points_per_lyapunov;
    const std::size_t n1 = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(ppl)), 1, H);
    const double horizon_all = static_cast<double>(H) / ppl;
    const double horizon_1 = static_cast<double>(n1) / ppl;

    double s_all = 0, mse_all = 0, mae_all = 0, s1 = 0, mse1 = 0, mae1 = 0, vpt = 0, one = 0;
    for (std::size_t c = 0; c < dim; ++c) {
        const auto t = truth.column(c), q = pred.column(c);
        const std::span<const double> t1(t.data(), n1), q1(q.data(), n1);
        s_all += metrics::smape(t, q);
        mse_all += metrics::mse(t, q);
        mae_all += metrics::mae(t, q);
        s1 += metrics::smape(t1, q1);
        mse1 += metrics::mse(t1, q1);
        mae1 += metrics::mae(t1, q1);
        vpt += metrics::valid_prediction_time(t, q, ppl, opt.vpt_threshold);
        one += metrics::smape(t1.first(1), q1.first(1));
    }
    const double nd = static_cast<double>(dim);
    using metrics::MetricReport;
    std::vector<MetricReport> out = {
        {"smape", s_all / nd, horizon_all, {}},
        {"mse", mse_all / nd, horizon_all, {}},
        {"mae", mae_all / nd, horizon_all, {}},
        {"smape_1tau", s1 / nd, horizon_1, {}},
        {"mse_1tau", mse1 / nd, horizon_1, {}},
        {"mae_1tau", mae1 / nd, horizon_1, {}},
        {"one_step_smape", one / nd, 1.0 / ppl, {}},
        {"vpt", vpt / nd, std::nullopt, {{"threshold", opt.vpt_threshold}, {"points_per_lyapunov", ppl}}},
    };
    if (opt.attractor_kl) {
        auto kl = metrics::kl_attractor(truth, pred, opt.kl);
        kl.report.metric = "kl_attractor";
        kl.report.horizon = horizon_all;
        out.push_back(std::move(kl.report));
    }
    if (opt.correlation_dims) {
        // Degenerate forecasts (e.g. constant baselines) have no dimension.
        for (auto [name, m] : {std::pair{"dcor_truth", &truth}, std::pair{"dcor_pred", &pred}}) {
            try {
                auto cd = metrics::correlation_dimension(*m, opt.corr_dim);
                cd.report.metric = name;
                out.push_back(std::move(cd.report));
            } catch (const InvalidArgument &) {
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepResult {
    std::string system;
    std::size_t L = 0;
    std::size_t seed = 0;
    std::string method;
    double one_step_error = 0.0;        ///< sMAPE of the first predicted point, averaged over dimensions
    std::optional<double> nn_distance;  ///< best-match distance, averaged over dimensions
    std::vector<metrics::MetricReport> metrics;

    std::optional<double> metric(const std::string &name) const {
        for (const auto &m : metrics)
            if (m.metric == name) return m.value;
        return std::nullopt;
    }
};

struct SweepConfig {
    std::vector<std::string> systems = systems::builtin_names();
    std::vector<MethodSpec> methods = {{Method::parrot}, {Method::mean}, {Method::naive}};
    std::vector<std::size_t> context_lengths = {200, 500, 1000, 2000, 5000, 10000};
    std::size_t seeds = 20;
    EmbedParams embed{5, 300, std::nullopt};
    double points_per_lyapunov = 30.0;
    std::size_t trajectory_length = 100'000;
    double noise_level = 0.0;
    std::uint64_t master_seed = 0;
    EvalOptions eval;
    std::size_t threads = 0; ///< 0 = hardware concurrency
};

/// Every violated precondition of a sweep config, reported together.
inline std::vector<std::string> validate(const SweepConfig &cfg) {
    std::vector<std::string> errs;
    if (cfg.systems.empty()) errs.push_back("no systems selected");
    for (const auto &s : cfg.systems) {
        try {
            systems::find(s);
        } catch (const InvalidArgument &e) {
            errs.emplace_back(e.what());
        }
    }
    if (cfg.methods.empty()) errs.push_back("no methods selected");
    if (cfg.context_lengths.empty()) errs.push_back("no context lengths selected");
    if (cfg.seeds == 0) errs.push_back("seeds must be >= 1");
    if (cfg.embed.D == 0) errs.push_back("embedding dimension D must be >= 1");
    if (cfg.embed.H == 0) errs.push_back("horizon H must be >= 1");
    if (!(cfg.points_per_lyapunov > 0.0)) errs.push_back("points_per_lyapunov must be > 0");
    if (cfg.noise_level < 0.0) errs.push_back("noise level must be >= 0");
    for (std::size_t L : cfg.context_lengths) {
        if (L + cfg.embed.H > cfg.trajectory_length)
            errs.push_back("cell L=" + std::to_string(L) + ": L + H = " + std::to_string(L + cfg.embed.H) +
                           " exceeds the trajectory length " + std::to_string(cfg.trajectory_length));
        for (const auto &m : cfg.methods) {
            if (!m.uses_motifs()) continue;
            if (L < cfg.embed.min_context())
                errs.push_back("cell L=" + std::to_string(L) + ", method " + to_string(m.method) +
                               ": context shorter than 2*D + exclusion = " + std::to_string(cfg.embed.min_context()));
            else if (m.method == Method::knn && admissible_motifs(L, cfg.embed) < m.k)
                errs.push_back("cell L=" + std::to_string(L) + ", method knn: k=" + std::to_string(m.k) +
                               " exceeds the admissible motifs");
            else if (m.method == Method::simplex && admissible_motifs(L, cfg.embed) < cfg.embed.D + 1)
                errs.push_back("cell L=" + std::to_string(L) + ", method simplex: fewer than D+1 admissible motifs");
        }
    }
    return errs;
}

inline void throw_if_invalid(const SweepConfig &cfg) {
    const auto errs = validate(cfg);
    if (errs.empty()) return;
    std::string msg = "invalid sweep configuration:";
    for (const auto &e : errs) msg += "\n  - " + e;
    throw InvalidArgument(msg);
}

/// Runs tasks 0..n-1 on a small pool. Exceptions are rethrown after join.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)> &task) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        task(i);
                    } catch (...) {
                        std::lock_guard lock(err_mutex);
                        if (!err) err = std::current_exception();
                    }
                }
            });
    }
    if (err) std::rethrow_exception(err);
}

/// Trajectory seed for (system, initial-condition index).
inline std::uint64_t trajectory_seed(std::uint64_t master, const std::string &system, std::size_t seed) {
    return derive_seed(master, fnv1a(system), seed);
}

/// Seed-keyed window start for a context of length L followed by H points.
inline std::size_t window_start(std::uint64_t master, const std::string &system, std::size_t seed, std::size_t L,
                                std::size_t H, std::size_t n_points) {
    const std::uint64_t h = derive_seed(master, fnv1a(system), seed, L, 0x77696e646f77ULL);
    return static_cast<std::size_t>(h % (n_points - (L + H) + 1));
}

/// The benchmark trajectory for one cell, with noise applied when requested.
inline TimeSeries benchmark_trajectory(const SystemSpec &spec, std::size_t seed, const SweepConfig &cfg) {
    auto ts = sample_trajectory(spec, cfg.points_per_lyapunov, cfg.trajectory_length,
                                trajectory_seed(cfg.master_seed, spec.name, seed));
    if (cfg.noise_level > 0.0)
        ts = add_gaussian_noise(std::move(ts), cfg.noise_level,
                                derive_seed(cfg.master_seed, fnv1a(spec.name), seed, 0x6e6f697365ULL));
    return ts;
}

inline std::vector<SweepResult> run_sweep(const SweepConfig &cfg) {
    throw_if_invalid(cfg);
    struct Task {
        std::size_t system_idx, seed;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < cfg.systems.size(); ++s)
        for (std::size_t seed = 0; seed < cfg.seeds; ++seed) tasks.push_back({s, seed});

    std::vector<std::vector<SweepResult>> per_task(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t ti) {
        const auto spec = systems::find(cfg.systems[tasks[ti].system_idx]);
        const std::size_t seed = tasks[ti].seed;
        const auto traj = benchmark_trajectory(spec, seed, cfg);
        for (std::size_t L : cfg.context_lengths) {
            const std::size_t start = window_start(cfg.master_seed, spec.name, seed, L, cfg.embed.H, traj.size());
            const Matrix context = traj.values.slice_rows(start, L);
            const Matrix truth = traj.values.slice_rows(start + L, cfg.embed.H);
            for (const auto &m : cfg.methods) {
                auto fc = forecast_each_dimension(context, cfg.embed, m);
                EvalOptions eval = cfg.eval;
                eval.points_per_lyapunov = cfg.points_per_lyapunov;
                eval.kl.seed = derive_seed(cfg.master_seed, fnv1a(spec.name), seed, L, 0x6b6cULL);
                eval.corr_dim.seed = eval.kl.seed;
                SweepResult r;
                r.system = spec.name;
                r.L = L;
                r.seed = seed;
                r.method = to_string(m.method);
                r.metrics = evaluate_forecast(truth, fc.prediction, eval);
                r.one_step_error = *r.metric("one_step_smape");
                if (m.uses_motifs()) {
                    double acc = 0.0;
                    for (const auto &d : fc.per_dim) acc += d.match_distance.value_or(0.0);
                    r.nn_distance = acc / static_cast<double>(fc.per_dim.size());
                }
                per_task[ti].push_back(std::move(r));
            }
        }
    });

    std::vector<SweepResult> out;
    for (auto &v : per_task)
        for (auto &r : v) out.push_back(std::move(r));
    auto order_of = [&](const SweepResult &r) {
        const auto sys = std::find(cfg.systems.begin(), cfg.systems.end(), r.system) - cfg.systems.begin();
        std::ptrdiff_t meth = 0;
        for (std::size_t i = 0; i < cfg.methods.size(); ++i)
            if (to_string(cfg.methods[i].method) == r.method) meth = static_cast<std::ptrdiff_t>(i);
        return std::tuple(sys, r.L, r.seed, meth);
    };
    std::sort(out.begin(), out.end(), [&](const auto &a, const auto &b) { return order_of(a) < order_of(b); });
    return out;
}

struct CellSummary {
    double mean = 0.0;
    double median = 0.0;
    std::size_t n = 0;
};

/// Mean and median of one metric over seeds, keyed by (system, L, method).
/// The pseudo-metrics "one_step_error" and "nn_distance" read the record fields.
inline std::map<std::tuple<std::string, std::size_t, std::string>, CellSummary>
summarize(const std::vector<SweepResult> &results, const std::string &metric) {
    std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<double>> groups;
    for (const auto &r : results) {
        std::optional<double> v;
        if (metric == "one_step_error") v = r.one_step_error;
        else if (metric == "nn_distance") v = r.nn_distance;
        else v = r.metric(metric);
        if (v) groups[{r.system, r.L, r.method}].push_back(*v);
    }
    std::map<std::tuple<std::string, std::size_t, std::string>, CellSummary> out;
    for (auto &[key, vals] : groups) out[key] = {stats::mean(vals), stats::median(vals), vals.size()};
    return out;
}

// ---------------------------------------------------------------------------
// Power laws and the scaling study

struct PowerLawFit {
    double alpha = 0.0;      ///< value ~ L^(-alpha)
    double intercept = 0.0;  ///< log-space intercept
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

/// Least-squares fit of log(value) against log(L); alpha is minus the slope.
inline PowerLawFit fit_power_law(const std::vector<std::pair<double, double>> &pairs) {
    std::vector<double> lx, ly, distinct;
    for (const auto &[L, v] : pairs) {
        require(L > 0.0, "fit_power_law: context lengths must be positive");
        require(v > 0.0 && std::isfinite(v), "fit_power_law: values must be positive and finite (log undefined)");
        lx.push_back(std::log(L));
        ly.push_back(std::log(v));
        if (std::find(distinct.begin(), distinct.end(), L) == distinct.end()) distinct.push_back(L);
    }
    require(distinct.size() >= 4, "fit_power_law: need at least 4 distinct context lengths");
    const auto f = stats::fit_line(lx, ly);
    return {-f.slope, f.intercept, f.r_squared, pairs.size()};
}

struct ScalingConfig {
    std::vector<std::string> systems = systems::builtin_names();
    std::vector<std::size_t> context_lengths = {200, 500, 1000, 2000, 5000, 10000};
    std::size_t seeds = 20;
    std::size_t D = 10;
    double points_per_lyapunov = 30.0;
    std::size_t trajectory_length = 100'000;
    std::size_t dcor_points = 100'000;
    std::uint64_t master_seed = 0;
    std::size_t threads = 0;
};

struct ScalingRow {
    std::string system;
    PowerLawFit fit_e;      ///< one-step error
    PowerLawFit fit_ell;    ///< nearest-motif distance
    double d_cor = 0.0;
    double e_ell_correlation = 0.0; ///< Pearson correlation of <e> and <ell> across L
    double e_ell_ratio = 0.0;       ///< least-squares c in <e> = c <ell>
    std::vector<double> mean_e, mean_ell; ///< per context length
};

struct ScalingStudy {
    std::vector<std::size_t> context_lengths;
    std::vector<ScalingRow> rows;
    double spearman_alpha_inv_dcor = 0.0; ///< Spearman(alpha_e, 1/d_cor)
    std::vector<SweepResult> records;
};

inline ScalingStudy scaling_study(const ScalingConfig &cfg) {
    SweepConfig sw;
    sw.systems = cfg.systems;
    sw.methods = {{Method::parrot}};
    sw.context_lengths = cfg.context_lengths;
    sw.seeds = cfg.seeds;
    sw.embed = {cfg.D, 1, std::nullopt};
    sw.points_per_lyapunov = cfg.points_per_lyapunov;
    sw.trajectory_length = cfg.trajectory_length;
    sw.master_seed = cfg.master_seed;
    sw.eval.attractor_kl = false;
    sw.threads = cfg.threads;

    ScalingStudy study;
    study.context_lengths = cfg.context_lengths;
    study.records = run_sweep(sw);
    const auto e = summarize(study.records, "one_step_error");
    const auto ell = summarize(study.records, "nn_distance");

    study.rows.resize(cfg.systems.size());
    parallel_for(cfg.systems.size(), cfg.threads, [&](std::size_t i) {
        const auto &name = cfg.systems[i];
        ScalingRow row;
        row.system = name;
        std::vector<std::pair<double, double>> pe, pl;
        for (std::size_t L : cfg.context_lengths) {
            row.mean_e.push_back(e.at({name, L, "parrot"}).mean);
            row.mean_ell.push_back(ell.at({name, L, "parrot"}).mean);
            pe.emplace_back(static_cast<double>(L), row.mean_e.back());
            pl.emplace_back(static_cast<double>(L), row.mean_ell.back());
        }
        row.fit_e = fit_power_law(pe);
        row.fit_ell = fit_power_law(pl);
        row.e_ell_correlation = stats::pearson(row.mean_e, row.mean_ell);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < row.mean_e.size(); ++k) {
            num += row.mean_e[k] * row.mean_ell[k];
            den += row.mean_ell[k] * row.mean_ell[k];
        }
        row.e_ell_ratio = num / den;
        const auto spec = systems::find(name);
        const auto traj = sample_trajectory(spec, cfg.points_per_lyapunov, cfg.dcor_points,
                                            trajectory_seed(cfg.master_seed, name, 0));
        metrics::CorrDimOptions cd;
        cd.seed = derive_seed(cfg.master_seed, fnv1a(name), 0x64636f72ULL);
        row.d_cor = metrics::correlation_dimension(traj.values, cd).value;
        study.rows[i] = std::move(row);
    });

    std::vector<double> alpha, inv_d;
    for (const auto &r : study.rows) {
        alpha.push_back(r.fit_e.alpha);
        inv_d.push_back(1.0 / r.d_cor);
    }
    if (alpha.size() >= 2) study.spearman_alpha_inv_dcor = stats::spearman(alpha, inv_d);
    return study;
}

// ---------------------------------------------------------------------------
// Long-horizon invariants

struct InvariantConfig {
    std::string system = "lorenz";
    std::vector<std::size_t> context_lengths = {100, 500, 3000};
    std::size_t horizon = 10'000;
    std::size_t seeds = 10;
    std::size_t D = 5;
    double points_per_lyapunov = 30.0;
    std::size_t spectrum_tail = 5000;
    std::size_t welch_segment = 256;
    std::uint64_t master_seed = 0;
    metrics::RosensteinOptions rosenstein{7, 0, 0, 0, 500};
    metrics::CorrDimOptions corr_dim;
    bool self_test = false; ///< evaluate the truth against itself instead of a parrot rollout
    std::size_t threads = 0;
};

struct InvariantRecord {
    std::size_t L = 0;
    std::size_t seed = 0;
    std::size_t period = 0;  ///< parrot rollout period L - s_opt (first dimension)
    double hellinger_psd = 0.0;
    double d_cor_error = 0.0;
    double lyapunov_error = 0.0;
};

struct InvariantRow {
    std::size_t L = 0;
    double median_hellinger = 0.0, median_d_cor_error = 0.0, median_lyapunov_error = 0.0;
    double mean_hellinger = 0.0, mean_d_cor_error = 0.0, mean_lyapunov_error = 0.0;
};

struct InvariantStudy {
    std::vector<InvariantRecord> records;
    std::vector<InvariantRow> rows;
};

/// True when every column of pred repeats with its forecast's period.
inline bool is_periodic_rollout(const MultiForecast &fc, std::size_t L) {
    for (std::size_t c = 0; c < fc.prediction.cols(); ++c) {
        const std::size_t period = L - *fc.per_dim[c].s_opt;
        for (std::size_t i = 0; i + period < fc.prediction.rows(); ++i)
            if (fc.prediction(i, c) != fc.prediction(i + period, c)) return false;
    }
    return true;
}

inline InvariantStudy invariant_convergence(const InvariantConfig &cfg) {
    require(!cfg.context_lengths.empty(), "invariant_convergence: no context lengths");
    require(std::is_sorted(cfg.context_lengths.begin(), cfg.context_lengths.end()),
            "invariant_convergence: context lengths must be increasing");
    require(cfg.horizon >= cfg.spectrum_tail && cfg.spectrum_tail >= cfg.welch_segment,
            "invariant_convergence: need horizon >= spectrum tail >= Welch segment");
    const auto spec = systems::find(cfg.system);
    const std::size_t n_points = cfg.context_lengths.back() + cfg.horizon;
    EmbedParams p{cfg.D, cfg.horizon, std::nullopt};
    for (std::size_t L : cfg.context_lengths)
        require(L >= p.min_context(), "invariant_convergence: L=" + std::to_string(L) + " below 2*D + exclusion");

    struct Task {
        std::size_t L, seed;
    };
    std::vector<Task> tasks;
    for (std::size_t L : cfg.context_lengths)
        for (std::size_t s = 0; s < cfg.seeds; ++s) tasks.push_back({L, s});
    std::vector<InvariantRecord> recs(tasks.size());

    parallel_for(tasks.size(), cfg.threads, [&](std::size_t ti) {
        const auto [L, seed] = tasks[ti];
        const auto traj = sample_trajectory(spec, cfg.points_per_lyapunov, n_points,
                                            trajectory_seed(cfg.master_seed, spec.name, seed));
        // Contexts end at the same point for every L so truths coincide.
        const std::size_t end = cfg.context_lengths.back();
        const Matrix context = traj.values.slice_rows(end - L, L);
        const Matrix truth = traj.values.slice_rows(end, cfg.horizon);
        InvariantRecord rec;
        rec.L = L;
        rec.seed = seed;
        Matrix pred;
        if (cfg.self_test) {
            pred = truth;
        } else {
            auto fc = forecast_each_dimension(context, p, {Method::parrot});
            if (!is_periodic_rollout(fc, L))
                throw NumericalError("invariant_convergence: parrot rollout is not periodic");
            rec.period = L - *fc.per_dim.front().s_opt;
            pred = std::move(fc.prediction);
        }
        const std::size_t dim = truth.cols();
        double hel = 0.0, lyap = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            const auto t = truth.column(c), q = pred.column(c);
            const std::span<const double> tt(t.data() + t.size() - cfg.spectrum_tail, cfg.spectrum_tail);
            const std::span<const double> qt(q.data() + q.size() - cfg.spectrum_tail, cfg.spectrum_tail);
            hel += metrics::hellinger_psd(metrics::welch_psd(tt, cfg.welch_segment),
                                          metrics::welch_psd(qt, cfg.welch_segment));
            const double lt = metrics::lyapunov_rosenstein(t, cfg.points_per_lyapunov, cfg.rosenstein).value;
            const double lq = metrics::lyapunov_rosenstein(q, cfg.points_per_lyapunov, cfg.rosenstein).value;
            lyap += std::abs(lq - lt);
        }
        rec.hellinger_psd = hel / static_cast<double>(dim);
        rec.lyapunov_error = lyap / static_cast<double>(dim);
        auto cd = cfg.corr_dim;
        cd.seed = derive_seed(cfg.master_seed, seed, L);
        const double dt = metrics::correlation_dimension(truth, cd).value;
        double dq = 0.0;
        try {
            dq = metrics::correlation_dimension(pred, cd).value;
        } catch (const InvalidArgument &) {
            dq = 0.0; // a single repeated point has dimension zero
        }
        rec.d_cor_error = std::abs(dq - dt);
        recs[ti] = rec;
    });

    InvariantStudy study;
    study.records = recs;
    for (std::size_t L : cfg.context_lengths) {
        std::vector<double> h, d, l;
        for (const auto &r : recs)
            if (r.L == L) {
                h.push_back(r.hellinger_psd);
                d.push_back(r.d_cor_error);
                l.push_back(r.lyapunov_error);
            }
        study.rows.push_back({L, stats::median(h), stats::median(d), stats::median(l), stats::mean(h),
                              stats::mean(d), stats::mean(l)});
    }
    return study;
}

// ---------------------------------------------------------------------------
// Noise and granularity sweeps

struct AppendixRow {
    double setting = 0.0; ///< noise level or points per Lyapunov time
    std::string method;
    double vpt = 0.0;
    double mae_1tau = 0.0;
    double mse_1tau = 0.0;
    double dcor_spearman = 0.0; ///< Spearman(d_cor of forecast, d_cor of truth) across cells
    double kl = 0.0;
    std::size_t cells = 0;
};

inline std::vector<AppendixRow> appendix_rows(double setting, const std::vector<SweepResult> &results,
                                              const std::vector<MethodSpec> &methods) {
    std::vector<AppendixRow> rows;
    for (const auto &m : methods) {
        const auto name = to_string(m.method);
        std::vector<double> vpt, mae1, mse1, kl, dp, dt;
        for (const auto &r : results) {
            if (r.method != name) continue;
            vpt.push_back(r.metric("vpt").value_or(0.0));
            mae1.push_back(r.metric("mae_1tau").value_or(0.0));
            mse1.push_back(r.metric("mse_1tau").value_or(0.0));
            if (auto k = r.metric("kl_attractor")) kl.push_back(*k);
            auto a = r.metric("dcor_pred"), b = r.metric("dcor_truth");
            if (a && b) {
                dp.push_back(*a);
                dt.push_back(*b);
            }
        }
        AppendixRow row;
        row.setting = setting;
        row.method = name;
        row.cells = vpt.size();
        if (!vpt.empty()) {
            row.vpt = stats::mean(vpt);
            row.mae_1tau = stats::mean(mae1);
            row.mse_1tau = stats::mean(mse1);
        }
        if (!kl.empty()) row.kl = stats::mean(kl);
        if (dp.size() >= 2) row.dcor_spearman = stats::spearman(dp, dt);
        rows.push_back(row);
    }
    return rows;
}

struct AppendixSweep {
    std::vector<AppendixRow> rows;
    std::vector<std::vector<SweepResult>> results; ///< one entry per setting
};

/// Repeats the base sweep with Gaussian observation noise at each level.
inline AppendixSweep noise_sweep(SweepConfig base, const std::vector<double> &levels = {1e-3, 1e-2, 1e-1}) {
    AppendixSweep out;
    for (double level : levels) {
        base.noise_level = level;
        auto res = run_sweep(base);
        auto rows = appendix_rows(level, res, base.methods);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        out.results.push_back(std::move(res));
    }
    return out;
}

/// Repeats the base sweep at each sampling granularity (points per Lyapunov time).
inline AppendixSweep granularity_sweep(SweepConfig base, const std::vector<double> &ppls = {10, 30, 50}) {
    AppendixSweep out;
    for (double ppl : ppls) {
        base.points_per_lyapunov = ppl;
        auto res = run_sweep(base);
        auto rows = appendix_rows(ppl, res, base.methods);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        out.results.push_back(std::move(res));
    }
    return out;
}

} // namespace ctxparrot
