#pragma once

// Forecast-evaluation metrics: pointwise errors, valid prediction time,
// attractor KL divergence, Welch spectra with Hellinger distance,
// Grassberger-Procaccia correlation dimension and Rosenstein's largest
// Lyapunov exponent.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctxparrot/core.hpp"
#include "ctxparrot/stats.hpp"

namespace ctxparrot::metrics {

/// A metric value with the settings it was computed under.
struct MetricReport {
    std::string metric;
    double value = 0.0;
    std::optional<double> horizon; ///< in Lyapunov times
    std::map<std::string, double> settings;
};

namespace detail {

inline void check_pair(std::span<const double> truth, std::span<const double> pred, const char *who) {
    require(truth.size() == pred.size(), std::string(who) + ": length mismatch (" + std::to_string(truth.size()) +
                                             " vs " + std::to_string(pred.size()) + ")");
    require(!truth.empty(), std::string(who) + ": empty input");
}

inline double smape_term(double a, double b) {
    const double den = std::abs(a) + std::abs(b);
    return den > 0.0 ? std::abs(a - b) / den : 0.0;
}

} // namespace detail

/// Symmetric mean absolute percentage error in [0, 200]. Terms whose
/// denominator is zero contribute 0.
inline double smape(std::span<const double> truth, std::span<const double> pred) {
    detail::check_pair(truth, pred, "smape");
    double acc = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) acc += detail::smape_term(truth[t], pred[t]);
    return 200.0 * acc / static_cast<double>(truth.size());
}

inline double mse(std::span<const double> truth, std::span<const double> pred) {
    detail::check_pair(truth, pred, "mse");
    double acc = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) acc += (truth[t] - pred[t]) * (truth[t] - pred[t]);
    return acc / static_cast<double>(truth.size());
}

inline double mae(std::span<const double> truth, std::span<const double> pred) {
    detail::check_pair(truth, pred, "mae");
    double acc = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) acc += std::abs(truth[t] - pred[t]);
    return acc / static_cast<double>(truth.size());
}

/// sMAPE over the first n points, for n = 1..T.
inline std::vector<double> rolling_smape(std::span<const double> truth, std::span<const double> pred) {
    detail::check_pair(truth, pred, "rolling_smape");
    std::vector<double> out(truth.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        acc += detail::smape_term(truth[t], pred[t]);
        out[t] = 200.0 * acc / static_cast<double>(t + 1);
    }
    return out;
}

/// Elapsed Lyapunov times until the rolling sMAPE over [0, t] first exceeds
/// threshold; the full horizon if it never does.
inline double valid_prediction_time(std::span<const double> truth, std::span<const double> pred,
                                    double points_per_lyapunov, double threshold = 30.0) {
    require(points_per_lyapunov > 0.0, "valid_prediction_time: points_per_lyapunov must be > 0");
    require(threshold >= 0.0, "valid_prediction_time: threshold must be >= 0");
    const auto roll = rolling_smape(truth, pred);
    for (std::size_t t = 0; t < roll.size(); ++t)
        if (roll[t] > threshold) return static_cast<double>(t) / points_per_lyapunov;
    return static_cast<double>(roll.size()) / points_per_lyapunov;
}

// ---------------------------------------------------------------------------
// Attractor KL divergence

struct KlOptions {
    double sigma = 1.0;
    std::size_t n_samples = 1000;
    std::size_t max_points = 5000;
    std::uint64_t seed = 0;
};

struct KlEstimate {
    double value = 0.0;
    double std_error = 0.0;
    MetricReport report;
};

namespace detail {

/// Evenly strided subsample of at most max_points rows.
inline Matrix stride_subsample(const Matrix &pts, std::size_t max_points) {
    if (pts.rows() <= max_points) return pts;
    const std::size_t stride = (pts.rows() + max_points - 1) / max_points;
    Matrix out;
    for (std::size_t r = 0; r < pts.rows(); r += stride) out.append_row(pts.row(r));
    return out;
}

/// log of the unnormalized mixture density sum_c exp(-|x-c|^2 / (2 sigma^2)) / N.
inline double log_mixture(const Matrix &centers, std::span<const double> x, double sigma, std::vector<double> &buf) {
    buf.resize(centers.rows());
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t r = 0; r < centers.rows(); ++r) {
        const auto c = centers.row(r);
        double d2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - c[k]) * (x[k] - c[k]);
        buf[r] = -d2 * inv;
    }
    return stats::log_sum_exp(buf) - std::log(static_cast<double>(centers.rows()));
}

} // namespace detail

/// Monte-Carlo estimate of KL(P || Q) between isotropic Gaussian mixtures
/// with one component (variance sigma^2) per trajectory point. Densities are
/// evaluated in the log domain, so Q never underflows.
inline KlEstimate kl_attractor(const Matrix &truth_traj, const Matrix &pred_traj, const KlOptions &opt = {}) {
    require(!truth_traj.empty() && !pred_traj.empty(), "kl_attractor: empty trajectory");
    require(truth_traj.cols() == pred_traj.cols(), "kl_attractor: dimension mismatch");
    require(opt.sigma > 0.0, "kl_attractor: sigma must be > 0");
    require(opt.n_samples >= 2, "kl_attractor: need at least two samples");
    const Matrix P = detail::stride_subsample(truth_traj, opt.max_points);
    const Matrix Q = detail::stride_subsample(pred_traj, opt.max_points);
    const std::size_t dim = P.cols();

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, P.rows() - 1);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> x(dim), buf, terms(opt.n_samples);
    for (std::size_t s = 0; s < opt.n_samples; ++s) {
        const auto c = P.row(pick(rng));
        for (std::size_t k = 0; k < dim; ++k) x[k] = c[k] + opt.sigma * n01(rng);
        terms[s] = detail::log_mixture(P, x, opt.sigma, buf) - detail::log_mixture(Q, x, opt.sigma, buf);
    }
    KlEstimate est;
    est.value = stats::mean(terms);
    est.std_error = stats::sample_stddev(terms) / std::sqrt(static_cast<double>(opt.n_samples));
    est.report.metric = "kl_attractor";
    est.report.value = est.value;
    est.report.settings = {{"sigma", opt.sigma},
                           {"n_samples", static_cast<double>(opt.n_samples)},
                           {"max_points", static_cast<double>(opt.max_points)},
                           {"points_truth", static_cast<double>(P.rows())},
                           {"points_pred", static_cast<double>(Q.rows())},
                           {"std_error", est.std_error},
                           {"seed", static_cast<double>(opt.seed)}};
    return est;
}

// ---------------------------------------------------------------------------
// Power spectra

namespace detail {
inline std::mutex &fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

/// Welch power spectral density: periodic-Hann-windowed, mean-detrended
/// segments of segment_length samples advanced by segment_length - overlap,
/// averaged one-sided periodograms normalized to sum 1. A series without
/// power after detrending puts all mass in the DC bin.
inline std::vector<double> welch_psd(std::span<const double> series, std::size_t segment_length = 256,
                                     std::optional<std::size_t> overlap = std::nullopt) {
    require(segment_length >= 2, "welch_psd: segment_length must be >= 2");
    require(series.size() >= segment_length, "welch_psd: series of length " + std::to_string(series.size()) +
                                                 " is shorter than the segment length " +
                                                 std::to_string(segment_length));
    const std::size_t ov = overlap.value_or(segment_length / 2);
    require(ov < segment_length, "welch_psd: overlap must be smaller than the segment");
    const std::size_t step = segment_length - ov;
    const std::size_t n_bins = segment_length / 2 + 1;

    std::vector<double> window(segment_length);
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < segment_length; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(segment_length));

    std::vector<double> in(segment_length);
    auto *out = static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * n_bins));
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment_length), in.data(), out, FFTW_ESTIMATE);
    }

    std::vector<double> psd(n_bins, 0.0);
    for (std::size_t start = 0; start + segment_length <= series.size(); start += step) {
        double m = 0.0;
        for (std::size_t i = 0; i < segment_length; ++i) m += series[start + i];
        m /= static_cast<double>(segment_length);
        for (std::size_t i = 0; i < segment_length; ++i) in[i] = (series[start + i] - m) * window[i];
        fftw_execute(plan);
        for (std::size_t b = 0; b < n_bins; ++b) {
            double p = out[b][0] * out[b][0] + out[b][1] * out[b][1];
            // One-sided: interior bins carry the mirrored negative frequencies.
            if (b != 0 && !(segment_length % 2 == 0 && b == n_bins - 1)) p *= 2.0;
            psd[b] += p;
        }
    }
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(out);

    double total = 0.0;
    for (double p : psd) total += p;
    if (!(total > 0.0)) {
        std::fill(psd.begin(), psd.end(), 0.0);
        psd[0] = 1.0;
        return psd;
    }
    for (double &p : psd) p /= total;
    return psd;
}

/// Hellinger distance between two normalized spectra, in [0, 1].
inline double hellinger_psd(std::span<const double> s1, std::span<const double> s2) {
    require(s1.size() == s2.size() && !s1.empty(), "hellinger_psd: spectra must have equal nonzero length");
    double acc = 0.0;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        const double d = std::sqrt(std::max(s1[i], 0.0)) - std::sqrt(std::max(s2[i], 0.0));
        acc += d * d;
    }
    return std::min(1.0, std::sqrt(acc) / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// Correlation dimension

struct CorrDimOptions {
    double q_lo = 0.001;  ///< lower pairwise-distance quantile of the fit window
    double q_hi = 0.05;   ///< upper pairwise-distance quantile
    std::size_t n_radii = 20;
    std::size_t max_points = 5000;
    std::size_t quantile_pairs = 1'000'000; ///< sampled pairs for locating the window
    std::uint64_t seed = 0;
};

struct CorrDimResult {
    double value = 0.0;
    double r_squared = 0.0;
    double r_lo = 0.0;
    double r_hi = 0.0;
    std::vector<double> radii;
    std::vector<double> correlation_sum; ///< fraction of pairs within each radius
    MetricReport report;
};

/// Grassberger-Procaccia: slope of log C(eps) against log eps over
/// log-spaced radii between two quantiles of the pairwise distances. Point
/// sets larger than max_points are randomly subsampled.
inline CorrDimResult correlation_dimension(const Matrix &traj, const CorrDimOptions &opt = {}) {
    require(traj.rows() >= 3, "correlation_dimension: need at least three points");
    require(opt.q_lo > 0.0 && opt.q_lo < opt.q_hi && opt.q_hi <= 1.0,
            "correlation_dimension: need 0 < q_lo < q_hi <= 1");
    require(opt.n_radii >= 2, "correlation_dimension: need at least two radii");
    std::mt19937_64 rng(opt.seed);

    Matrix pts;
    if (traj.rows() > opt.max_points) {
        std::vector<std::size_t> idx(traj.rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(opt.max_points);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) pts.append_row(traj.row(i));
    } else {
        pts = traj;
    }
    const std::size_t n = pts.rows();
    const std::size_t dim = pts.cols();
    auto dist2 = [&](std::size_t a, std::size_t b) {
        const auto pa = pts.row(a), pb = pts.row(b);
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += (pa[k] - pb[k]) * (pa[k] - pb[k]);
        return s;
    };
    const double n_pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);

    // Locate the window from the positive pairwise distances (all pairs when
    // there are few, a random sample otherwise). Repeated points still count
    // towards C(eps).
    std::vector<double> sample;
    if (n_pairs <= static_cast<double>(opt.quantile_pairs)) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (const double d2 = dist2(a, b); d2 > 0.0) sample.push_back(std::sqrt(d2));
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        sample.reserve(opt.quantile_pairs);
        for (std::size_t tries = 0; sample.size() < opt.quantile_pairs && tries < 4 * opt.quantile_pairs; ++tries) {
            const auto a = pick(rng), b = pick(rng);
            if (a == b) continue;
            if (const double d2 = dist2(a, b); d2 > 0.0) sample.push_back(std::sqrt(d2));
        }
    }
    if (sample.empty()) throw InvalidArgument("correlation_dimension: degenerate point set (all points identical)");
    std::sort(sample.begin(), sample.end());
    const double r_lo = stats::quantile_sorted(sample, opt.q_lo);
    const double r_hi = stats::quantile_sorted(sample, opt.q_hi);
    if (!(r_lo > 0.0) || !(r_hi > r_lo))
        throw InvalidArgument("correlation_dimension: degenerate point set (no spread in pairwise distances)");

    std::vector<double> radii(opt.n_radii), radii2(opt.n_radii);
    for (std::size_t i = 0; i < opt.n_radii; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(opt.n_radii - 1);
        radii[i] = std::exp(std::log(r_lo) + f * (std::log(r_hi) - std::log(r_lo)));
        radii2[i] = radii[i] * radii[i];
    }
    // hist[i] counts pairs with distance in (radii[i-1], radii[i]].
    std::vector<std::uint64_t> hist(opt.n_radii, 0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d2 = dist2(a, b);
            if (d2 > radii2.back()) continue;
            const auto it = std::lower_bound(radii2.begin(), radii2.end(), d2);
            ++hist[static_cast<std::size_t>(it - radii2.begin())];
        }
    CorrDimResult res;
    res.radii = radii;
    res.correlation_sum.resize(opt.n_radii);
    std::vector<double> lx, ly;
    std::uint64_t cum = 0;
    for (std::size_t i = 0; i < opt.n_radii; ++i) {
        cum += hist[i];
        res.correlation_sum[i] = static_cast<double>(cum) / n_pairs;
        if (cum > 0) {
            lx.push_back(std::log(radii[i]));
            ly.push_back(std::log(res.correlation_sum[i]));
        }
    }
    require(lx.size() >= 2, "correlation_dimension: too few populated radii to fit");
    const auto fit = stats::fit_line(lx, ly);
    res.value = fit.slope;
    res.r_squared = fit.r_squared;
    res.r_lo = r_lo;
    res.r_hi = r_hi;
    res.report.metric = "correlation_dimension";
    res.report.value = res.value;
    res.report.settings = {{"q_lo", opt.q_lo},       {"q_hi", opt.q_hi},
                           {"r_lo", r_lo},           {"r_hi", r_hi},
                           {"n_radii", static_cast<double>(opt.n_radii)},
                           {"points", static_cast<double>(n)},
                           {"r_squared", fit.r_squared},
                           {"seed", static_cast<double>(opt.seed)}};
    return res;
}

// ---------------------------------------------------------------------------
// Rosenstein largest Lyapunov exponent

struct RosensteinOptions {
    std::size_t embed_dim = 7;
    std::size_t lag = 0;            ///< 0 picks round(points_per_lyapunov / 5), at least 1
    std::size_t theiler = 0;        ///< minimum temporal separation; 0 picks 2 * points_per_lyapunov
    std::size_t fit_steps = 0;      ///< length of the fitted initial region; 0 picks 2 * points_per_lyapunov
    std::size_t max_references = 2000;
};

struct RosensteinResult {
    double value = 0.0;             ///< per Lyapunov time
    double slope_per_step = 0.0;
    double r_squared = 0.0;
    bool low_confidence = false;
    std::vector<double> divergence; ///< mean log separation against step
    MetricReport report;
};

/// Rosenstein's method: delay-embed, pair each reference point with its
/// nearest neighbour outside a Theiler window, and fit the growth of the
/// mean log separation over the initial region. Neighbours at distance
/// (numerically) zero are skipped: exact repeats carry no divergence
/// information. The slope is converted to units of 1 / Lyapunov time.
inline RosensteinResult lyapunov_rosenstein(std::span<const double> series, double points_per_lyapunov,
                                            RosensteinOptions opt = {}) {
    require(points_per_lyapunov > 0.0, "lyapunov_rosenstein: points_per_lyapunov must be > 0");
    require(opt.embed_dim >= 1, "lyapunov_rosenstein: embed_dim must be >= 1");
    if (opt.lag == 0) opt.lag = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(points_per_lyapunov / 5.0)));
    if (opt.theiler == 0) opt.theiler = static_cast<std::size_t>(std::lround(2.0 * points_per_lyapunov));
    if (opt.fit_steps == 0) opt.fit_steps = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(2.0 * points_per_lyapunov)));

    const std::size_t span_len = (opt.embed_dim - 1) * opt.lag;
    require(series.size() > span_len + opt.fit_steps + opt.theiler + 2,
            "lyapunov_rosenstein: series too short for the embedding and fit window");
    const std::size_t m = series.size() - span_len; // embedded points
    const std::size_t usable = m - opt.fit_steps;   // points with a full divergence track

    const double scale = stats::stddev(series);
    const double zero_tol = 1e-10 * (scale > 0.0 ? scale : 1.0);
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t k = 0; k < opt.embed_dim; ++k) {
            const double d = series[a + k * opt.lag] - series[b + k * opt.lag];
            s += d * d;
        }
        return std::sqrt(s);
    };

    const std::size_t n_ref = std::min(opt.max_references, usable);
    const double stride = static_cast<double>(usable) / static_cast<double>(n_ref);
    std::vector<double> sum_log(opt.fit_steps + 1, 0.0);
    std::vector<std::size_t> n_log(opt.fit_steps + 1, 0);
    for (std::size_t r = 0; r < n_ref; ++r) {
        const auto i = static_cast<std::size_t>(static_cast<double>(r) * stride);
        std::size_t best = usable;
        double best_d = INFINITY;
        for (std::size_t j = 0; j < usable; ++j) {
            if ((i > j ? i - j : j - i) <= opt.theiler) continue;
            const double d = dist(i, j);
            if (d > zero_tol && d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best == usable) continue;
        for (std::size_t k = 0; k <= opt.fit_steps; ++k) {
            const double d = dist(i + k, best + k);
            if (d > zero_tol) {
                sum_log[k] += std::log(d);
                ++n_log[k];
            }
        }
    }
    RosensteinResult res;
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k <= opt.fit_steps; ++k) {
        if (n_log[k] == 0) continue;
        res.divergence.push_back(sum_log[k] / static_cast<double>(n_log[k]));
        xs.push_back(static_cast<double>(k));
        ys.push_back(res.divergence.back());
    }
    if (xs.size() < 2) {
        res.low_confidence = true;
    } else {
        const auto fit = stats::fit_line(xs, ys);
        res.slope_per_step = fit.slope;
        res.r_squared = fit.r_squared;
        res.low_confidence = fit.r_squared < 0.8;
    }
    res.value = res.slope_per_step * points_per_lyapunov;
    res.report.metric = "lyapunov_rosenstein";
    res.report.value = res.value;
    res.report.settings = {{"embed_dim", static_cast<double>(opt.embed_dim)},
                           {"lag", static_cast<double>(opt.lag)},
                           {"theiler", static_cast<double>(opt.theiler)},
                           {"fit_steps", static_cast<double>(opt.fit_steps)},
                           {"r_squared", res.r_squared},
                           {"low_confidence", res.low_confidence ? 1.0 : 0.0}};
    return res;
}

} // namespace ctxparrot::metrics
