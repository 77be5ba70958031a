#pragma once

// Context parroting and its kernel-regression relatives.
//
// Index convention: a context has L points x[0..L-1]. A motif "ending at s"
// (1 <= s <= L) covers x[s-D .. s-1]; its continuation starts at x[s]. The
// query is the motif ending at L. Admissible motif ends for matching are
// s in [D, L - D - exclusion], i.e. motifs inside the first L - D points with
// the last `exclusion` of those skipped. Continuations x[s .. L-1] shorter
// than H are tiled periodically with period L - s.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxparrot/core.hpp"

namespace ctxparrot {

struct EmbedParams {
    std::size_t D = 5;             ///< motif length / embedding dimension
    std::size_t H = 300;           ///< forecast horizon
    std::optional<std::size_t> exclusion; ///< trailing motifs skipped; defaults to D

    std::size_t excluded() const { return exclusion.value_or(D); }
    /// Shortest context with at least one admissible motif.
    std::size_t min_context() const { return 2 * D + excluded(); }
};

struct ForecastResult {
    std::vector<double> prediction;
    std::string method;
    /// End index of the best-matching motif; prediction copies x[s_opt..L-1].
    std::optional<std::size_t> s_opt;
    /// Euclidean distance between the query and the best-matching motif.
    std::optional<double> match_distance;
    /// Shannon entropy (nats) of the normalized kernel weights.
    std::optional<double> weights_entropy;
    std::string note;
};

enum class KernelKind { gaussian, smap_exponential, softmax_dot };

struct KernelParams {
    KernelKind kind = KernelKind::gaussian;
    double bandwidth = 1.0; ///< h (gaussian), theta (smap_exponential), temperature (softmax_dot)
    std::optional<double> dbar; ///< distance scale for smap_exponential

    void validate() const {
        require(bandwidth > 0.0 && !std::isnan(bandwidth), "kernel bandwidth must be > 0");
        if (kind == KernelKind::smap_exponential)
            require(dbar.has_value() && *dbar > 0.0, "smap_exponential kernel needs dbar > 0");
    }
};

namespace detail {

inline void check_context(std::span<const double> x, const EmbedParams &p, const char *who) {
    require(p.D >= 1, std::string(who) + ": D must be >= 1");
    require(p.H >= 1, std::string(who) + ": H must be >= 1");
    require(x.size() >= p.min_context(),
            std::string(who) + ": context length " + std::to_string(x.size()) + " is below the minimum " +
                std::to_string(p.min_context()) + " (2*D + exclusion)");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]))
            throw InvalidArgument(std::string(who) + ": non-finite value at context index " + std::to_string(i));
}

inline double sq_distance(std::span<const double> x, std::size_t a_end, std::size_t b_end, std::size_t D) {
    double acc = 0.0;
    for (std::size_t k = 0; k < D; ++k) {
        const double d = x[a_end - D + k] - x[b_end - D + k];
        acc += d * d;
    }
    return acc;
}

/// Admissible motif ends and their squared distance to the query.
struct MotifScan {
    std::size_t first = 0; // smallest admissible s
    std::vector<double> sq_dist;

    std::size_t count() const { return sq_dist.size(); }
    std::size_t end_index(std::size_t i) const { return first + i; }
};

inline MotifScan scan_motifs(std::span<const double> x, const EmbedParams &p) {
    const std::size_t L = x.size();
    const std::size_t last = L - p.D - p.excluded();
    MotifScan scan;
    scan.first = p.D;
    scan.sq_dist.reserve(last - p.D + 1);
    for (std::size_t s = p.D; s <= last; ++s) scan.sq_dist.push_back(sq_distance(x, s, L, p.D));
    return scan;
}

inline double continuation_value(std::span<const double> x, std::size_t s, std::size_t i) {
    return x[s + i % (x.size() - s)];
}

inline std::vector<double> tile_continuation(std::span<const double> x, std::size_t s, std::size_t H) {
    std::vector<double> out(H);
    for (std::size_t i = 0; i < H; ++i) out[i] = continuation_value(x, s, i);
    return out;
}

/// Log kernel weight of the motif ending at s against the query.
inline double log_kernel(std::span<const double> x, std::size_t s, double sq_dist, std::size_t D,
                         const KernelParams &kp) {
    switch (kp.kind) {
    case KernelKind::gaussian:
        // Exact matches keep full weight even when h^2 underflows.
        return sq_dist == 0.0 ? 0.0 : -sq_dist / (2.0 * kp.bandwidth * kp.bandwidth);
    case KernelKind::smap_exponential:
        return -kp.bandwidth * std::sqrt(sq_dist) / *kp.dbar;
    case KernelKind::softmax_dot: {
        const std::size_t L = x.size();
        double dot = 0.0;
        for (std::size_t k = 0; k < D; ++k) dot += x[s - D + k] * x[L - D + k];
        return dot / kp.bandwidth;
    }
    }
    return 0.0;
}

/// Normalizes log-weights against their maximum, so the largest weight is
/// exactly 1 before normalization and never underflows.
inline std::vector<double> normalized_weights(std::span<const double> log_w) {
    const double m = *std::max_element(log_w.begin(), log_w.end());
    std::vector<double> w(log_w.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(log_w[i] - m);
        total += w[i];
    }
    for (double &wi : w) wi /= total;
    return w;
}

inline double entropy(std::span<const double> w) {
    double h = 0.0;
    for (double wi : w)
        if (wi > 0.0) h -= wi * std::log(wi);
    return h;
}

/// Weighted average of tiled continuations; skips exactly-zero weights so a
/// collapsed weight vector reproduces the copied values bit-for-bit.
inline std::vector<double> weighted_continuation(std::span<const double> x, std::span<const std::size_t> ends,
                                                 std::span<const double> w, std::size_t H) {
    std::vector<double> out(H, 0.0);
    for (std::size_t j = 0; j < ends.size(); ++j) {
        if (w[j] == 0.0) continue;
        for (std::size_t i = 0; i < H; ++i) out[i] += w[j] * continuation_value(x, ends[j], i);
    }
    return out;
}

inline std::size_t argmin_first(std::span<const double> v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

inline std::size_t count_nonzero(std::span<const double> w) {
    return static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v > 0.0; }));
}

} // namespace detail

/// Number of admissible motifs for a context of length L.
inline std::size_t admissible_motifs(std::size_t L, const EmbedParams &p) {
    return L >= p.min_context() ? L - p.min_context() + 1 : 0;
}

/// Context parroting: find the admissible motif nearest the query (ties go to
/// the earliest) and copy what followed it, tiled to length H.
inline ForecastResult parrot_forecast(std::span<const double> context, const EmbedParams &p) {
    detail::check_context(context, p, "parrot_forecast");
    const auto scan = detail::scan_motifs(context, p);
    const std::size_t best = detail::argmin_first(scan.sq_dist);
    ForecastResult r;
    r.method = "parrot";
    r.s_opt = scan.end_index(best);
    r.match_distance = std::sqrt(scan.sq_dist[best]);
    r.prediction = detail::tile_continuation(context, *r.s_opt, p.H);
    return r;
}

/// k-nearest-neighbour parroting: the k motifs with the largest kernel weight
/// (ties to the earliest), averaged with their weights renormalized over the
/// selection. k = 1 reproduces parrot_forecast exactly for distance kernels.
inline ForecastResult knn_forecast(std::span<const double> context, const EmbedParams &p, std::size_t k,
                                   const KernelParams &kp) {
    detail::check_context(context, p, "knn_forecast");
    kp.validate();
    const auto scan = detail::scan_motifs(context, p);
    require(k >= 1 && k <= scan.count(), "knn_forecast: k=" + std::to_string(k) + " outside [1, " +
                                             std::to_string(scan.count()) + "] admissible motifs");
    std::vector<double> log_w(scan.count());
    for (std::size_t i = 0; i < scan.count(); ++i)
        log_w[i] = detail::log_kernel(context, scan.end_index(i), scan.sq_dist[i], p.D, kp);

    std::vector<std::size_t> order(scan.count());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return log_w[a] > log_w[b]; });
    order.resize(k);

    std::vector<std::size_t> ends(k);
    std::vector<double> sel_log_w(k);
    for (std::size_t j = 0; j < k; ++j) {
        ends[j] = scan.end_index(order[j]);
        sel_log_w[j] = log_w[order[j]];
    }
    const auto w = detail::normalized_weights(sel_log_w);

    ForecastResult r;
    r.method = "knn";
    r.prediction = detail::weighted_continuation(context, ends, w, p.H);
    r.s_opt = ends.front();
    r.match_distance = std::sqrt(scan.sq_dist[order.front()]);
    r.weights_entropy = detail::entropy(w);
    return r;
}

/// Simplex projection generalized to H steps: k = D + 1 neighbours, Gaussian
/// kernel whose bandwidth is the nearest-neighbour distance.
inline ForecastResult simplex_forecast(std::span<const double> context, const EmbedParams &p) {
    detail::check_context(context, p, "simplex_forecast");
    const auto scan = detail::scan_motifs(context, p);
    require(scan.count() >= p.D + 1, "simplex_forecast: needs at least D+1 admissible motifs, have " +
                                         std::to_string(scan.count()));
    const double nearest = std::sqrt(*std::min_element(scan.sq_dist.begin(), scan.sq_dist.end()));
    KernelParams kp;
    kp.kind = KernelKind::gaussian;
    // Exact matches: any positive bandwidth below the float resolution makes
    // only the zero-distance neighbours count.
    kp.bandwidth = nearest > 0.0 ? nearest : std::numeric_limits<double>::min();
    auto r = knn_forecast(context, p, p.D + 1, kp);
    r.method = "simplex";
    return r;
}

/// One-step simplex projection (H = 1, k = D + 1).
inline double simplex_projection(std::span<const double> context, std::size_t D) {
    EmbedParams p;
    p.D = D;
    p.H = 1;
    return simplex_forecast(context, p).prediction.front();
}

/// Mean pairwise Euclidean distance among all length-D windows of x.
inline double mean_pairwise_motif_distance(std::span<const double> x, std::size_t D) {
    require(D >= 1 && x.size() >= D + 1, "mean_pairwise_motif_distance: need at least two motifs");
    const std::size_t m = x.size() - D + 1;
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) total += std::sqrt(detail::sq_distance(x, a + D, b + D, D));
    return total / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

/// Nadaraya-Watson forecast over every admissible motif.
inline ForecastResult nw_forecast(std::span<const double> context, const EmbedParams &p, const KernelParams &kp) {
    detail::check_context(context, p, "nw_forecast");
    kp.validate();
    const auto scan = detail::scan_motifs(context, p);
    std::vector<double> log_w(scan.count());
    std::vector<std::size_t> ends(scan.count());
    for (std::size_t i = 0; i < scan.count(); ++i) {
        ends[i] = scan.end_index(i);
        log_w[i] = detail::log_kernel(context, ends[i], scan.sq_dist[i], p.D, kp);
    }
    const auto w = detail::normalized_weights(log_w);
    const std::size_t best = detail::argmin_first(scan.sq_dist);

    ForecastResult r;
    r.method = "nw";
    r.prediction = detail::weighted_continuation(context, ends, w, p.H);
    r.s_opt = scan.end_index(best);
    r.match_distance = std::sqrt(scan.sq_dist[best]);
    r.weights_entropy = detail::entropy(w);
    if (detail::count_nonzero(w) == 1) r.note = "weights collapsed onto a single motif (1-NN limit)";
    return r;
}

/// S-map-style Nadaraya-Watson forecast with weights exp(-theta * d / dbar),
/// dbar the mean pairwise motif distance. theta = 0 gives the global average.
inline ForecastResult smap_forecast(std::span<const double> context, const EmbedParams &p, double theta) {
    detail::check_context(context, p, "smap_forecast");
    require(theta >= 0.0, "smap_forecast: theta must be >= 0");
    const auto scan = detail::scan_motifs(context, p);
    require(scan.count() >= 2, "smap_forecast: needs at least two admissible motifs");
    const double dbar = mean_pairwise_motif_distance(context, p.D);

    std::vector<double> log_w(scan.count(), 0.0);
    std::vector<std::size_t> ends(scan.count());
    std::string note;
    for (std::size_t i = 0; i < scan.count(); ++i) ends[i] = scan.end_index(i);
    if (dbar > 0.0 && theta > 0.0) {
        KernelParams kp{KernelKind::smap_exponential, theta, dbar};
        for (std::size_t i = 0; i < scan.count(); ++i)
            log_w[i] = detail::log_kernel(context, ends[i], scan.sq_dist[i], p.D, kp);
    } else if (dbar == 0.0) {
        note = "all motifs identical (dbar = 0); uniform weights";
    }
    const auto w = detail::normalized_weights(log_w);
    const std::size_t best = detail::argmin_first(scan.sq_dist);

    ForecastResult r;
    r.method = "smap";
    r.prediction = detail::weighted_continuation(context, ends, w, p.H);
    r.s_opt = scan.end_index(best);
    r.match_distance = std::sqrt(scan.sq_dist[best]);
    r.weights_entropy = detail::entropy(w);
    r.note = std::move(note);
    return r;
}

/// Unweighted mean of the tiled continuations of every admissible motif.
inline std::vector<double> global_continuation_mean(std::span<const double> context, const EmbedParams &p) {
    detail::check_context(context, p, "global_continuation_mean");
    const std::size_t n = admissible_motifs(context.size(), p);
    std::vector<double> out(p.H, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < p.H; ++i) out[i] += detail::continuation_value(context, p.D + j, i);
    for (double &v : out) v /= static_cast<double>(n);
    return out;
}

inline ForecastResult mean_baseline(std::span<const double> context, std::size_t H) {
    require(!context.empty(), "mean_baseline: empty context");
    const double m = std::accumulate(context.begin(), context.end(), 0.0) / static_cast<double>(context.size());
    return {std::vector<double>(H, m), "mean", std::nullopt, std::nullopt, std::nullopt, {}};
}

inline ForecastResult naive_baseline(std::span<const double> context, std::size_t H) {
    require(!context.empty(), "naive_baseline: empty context");
    return {std::vector<double>(H, context.back()), "naive", std::nullopt, std::nullopt, std::nullopt, {}};
}

} // namespace ctxparrot
