#pragma once

// Trajectory generation: fixed-step RK4 integration of autonomous ODEs,
// largest-Lyapunov-exponent estimation, Lyapunov-time sampling and
// observation noise.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctxparrot/core.hpp"
#include "ctxparrot/stats.hpp"

namespace ctxparrot {

using State = std::vector<double>;

/// Writes dx/dt for state x into dxdt. Both spans have the system dimension.
using VectorField = std::function<void(std::span<const double> x, std::span<double> dxdt)>;

struct SystemSpec {
    std::string name;
    std::size_t dim = 0;
    VectorField vector_field;
    State default_ic;
    /// Largest Lyapunov exponent, 1/model-time. The Lyapunov time is 1/reference_lle.
    double reference_lle = 0.0;
    /// Model time discarded before sampling.
    double transient_time = 0.0;

    double lyapunov_time() const { return 1.0 / reference_lle; }
};

/// Uniformly sampled multivariate series plus the sampling metadata needed
/// to interpret horizons in Lyapunov times.
struct TimeSeries {
    Matrix values; ///< n_points x dim
    double dt = 1.0;
    double points_per_lyapunov = 1.0;
    bool normalized = false;
    std::string source;
    /// Per-column offset and scale removed by z-scoring (raw = z * scale + offset).
    std::vector<double> norm_offset;
    std::vector<double> norm_scale;

    std::size_t size() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
    std::vector<double> column(std::size_t c) const { return values.column(c); }
};

namespace detail {

struct Rk4Workspace {
    explicit Rk4Workspace(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
    State k1, k2, k3, k4, tmp;
};

inline void rk4_step(const VectorField &f, std::span<double> x, double dt, Rk4Workspace &w) {
    const std::size_t n = x.size();
    f(x, w.k1);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k1[i];
    f(w.tmp, w.k2);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k2[i];
    f(w.tmp, w.k3);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + dt * w.k3[i];
    f(w.tmp, w.k4);
    for (std::size_t i = 0; i < n; ++i)
        x[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
}

inline void check_finite_state(std::span<const double> x, std::size_t step, const std::string &name) {
    if (!all_finite(x))
        throw NumericalError("integration of '" + name + "' diverged at step " + std::to_string(step));
}

inline void advance(const SystemSpec &spec, std::span<double> x, double dt, std::size_t n_steps,
                    Rk4Workspace &w, std::size_t step_offset = 0) {
    for (std::size_t s = 0; s < n_steps; ++s) {
        rk4_step(spec.vector_field, x, dt, w);
        check_finite_state(x, step_offset + s + 1, spec.name);
    }
}

} // namespace detail

/// Classical fourth-order Runge-Kutta with fixed step. Returns n_steps + 1
/// rows, the first being x0.
inline Matrix integrate_rk4(const SystemSpec &spec, std::span<const double> x0, double dt,
                            std::size_t n_steps) {
    require(dt > 0.0, "integrate_rk4: dt must be positive");
    require(n_steps >= 1, "integrate_rk4: n_steps must be >= 1");
    require(x0.size() == spec.dim, "integrate_rk4: initial state has " + std::to_string(x0.size()) +
                                       " entries, system '" + spec.name + "' has dim " +
                                       std::to_string(spec.dim));
    Matrix out(n_steps + 1, spec.dim);
    State x(x0.begin(), x0.end());
    detail::check_finite_state(x, 0, spec.name);
    detail::Rk4Workspace w(spec.dim);
    std::copy(x.begin(), x.end(), out.row(0).begin());
    for (std::size_t s = 1; s <= n_steps; ++s) {
        detail::rk4_step(spec.vector_field, x, dt, w);
        detail::check_finite_state(x, s, spec.name);
        std::copy(x.begin(), x.end(), out.row(s).begin());
    }
    return out;
}

struct LyapunovEstimate {
    double value = 0.0;
    /// Set when a system registered as chaotic produced a non-positive estimate.
    bool suspect = false;
    std::string note;
};

/// Integration step used for a system: Lyapunov time / 300, or 0.01 for
/// systems without a reference exponent.
inline double default_integration_step(const SystemSpec &spec) {
    return spec.reference_lle > 0.0 ? spec.lyapunov_time() / 300.0 : 0.01;
}

/// Benettin's method: propagate one tangent vector alongside the trajectory
/// and renormalize it every renorm_interval; the exponent is the mean log
/// growth rate. Tangent dynamics use a central-difference Jacobian-vector
/// product, so only the vector field is needed.
inline LyapunovEstimate estimate_lle_benettin(const SystemSpec &spec, double t_total,
                                              double renorm_interval, double dt = 0.0) {
    require(t_total > 0.0 && renorm_interval > 0.0, "estimate_lle_benettin: times must be positive");
    if (dt <= 0.0) dt = default_integration_step(spec);
    const std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(renorm_interval / dt)));
    dt = renorm_interval / static_cast<double>(sub);
    const auto n_renorm = static_cast<std::size_t>(std::ceil(t_total / renorm_interval));
    const std::size_t n = spec.dim;

    State x = spec.default_ic;
    detail::Rk4Workspace w(n);
    detail::advance(spec, x, dt, static_cast<std::size_t>(std::ceil(spec.transient_time / dt)), w);

    // Joint (state, tangent) system of size 2n.
    State fx(n), fp(n), fm(n), xp(n), xm(n);
    const VectorField joint = [&](std::span<const double> z, std::span<double> dz) {
        auto xs = z.subspan(0, n);
        auto v = z.subspan(n, n);
        spec.vector_field(xs, dz.subspan(0, n));
        double vnorm = 0.0, xnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            vnorm += v[i] * v[i];
            xnorm += xs[i] * xs[i];
        }
        vnorm = std::sqrt(vnorm);
        if (vnorm == 0.0) {
            for (std::size_t i = 0; i < n; ++i) dz[n + i] = 0.0;
            return;
        }
        const double eps = 1e-6 * (1.0 + std::sqrt(xnorm)) / vnorm;
        for (std::size_t i = 0; i < n; ++i) {
            xp[i] = xs[i] + eps * v[i];
            xm[i] = xs[i] - eps * v[i];
        }
        spec.vector_field(xp, fp);
        spec.vector_field(xm, fm);
        for (std::size_t i = 0; i < n; ++i) dz[n + i] = (fp[i] - fm[i]) / (2.0 * eps);
    };
    SystemSpec tangent{spec.name + "+tangent", 2 * n, joint, {}, 0.0, 0.0};

    State z(2 * n, 0.0);
    std::copy(x.begin(), x.end(), z.begin());
    for (std::size_t i = 0; i < n; ++i) z[n + i] = 1.0 / std::sqrt(static_cast<double>(n));
    detail::Rk4Workspace wz(2 * n);

    double log_growth = 0.0;
    for (std::size_t r = 0; r < n_renorm; ++r) {
        detail::advance(tangent, z, dt, sub, wz, r * sub);
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += z[n + i] * z[n + i];
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw NumericalError("estimate_lle_benettin: tangent vector degenerated for '" + spec.name + "'");
        log_growth += std::log(norm);
        for (std::size_t i = 0; i < n; ++i) z[n + i] /= norm;
    }
    LyapunovEstimate est;
    est.value = log_growth / (static_cast<double>(n_renorm) * renorm_interval);
    if (spec.reference_lle > 0.0 && est.value <= 0.0) {
        est.suspect = true;
        est.note = "non-positive exponent for a system registered as chaotic";
    }
    return est;
}

/// Z-scores every column in place (population std). Constant columns are
/// centred and left unscaled.
inline TimeSeries zscore(TimeSeries ts) {
    const std::size_t d = ts.dim();
    std::vector<double> offset(d), scale(d);
    for (std::size_t c = 0; c < d; ++c) {
        const auto col = ts.values.column(c);
        offset[c] = stats::mean(col);
        const double sd = stats::stddev(col);
        scale[c] = sd > 0.0 ? sd : 1.0;
        for (std::size_t r = 0; r < ts.size(); ++r)
            ts.values(r, c) = (ts.values(r, c) - offset[c]) / scale[c];
    }
    // Compose with any earlier normalization so raw values stay recoverable.
    if (ts.norm_offset.size() == d && ts.norm_scale.size() == d) {
        for (std::size_t c = 0; c < d; ++c) {
            ts.norm_offset[c] += ts.norm_scale[c] * offset[c];
            ts.norm_scale[c] *= scale[c];
        }
    } else {
        ts.norm_offset = std::move(offset);
        ts.norm_scale = std::move(scale);
    }
    ts.normalized = true;
    return ts;
}

/// Undoes z-scoring using the stored offset and scale.
inline Matrix denormalized(const TimeSeries &ts) {
    Matrix raw = ts.values;
    if (ts.norm_offset.size() != ts.dim()) return raw;
    for (std::size_t r = 0; r < raw.rows(); ++r)
        for (std::size_t c = 0; c < raw.cols(); ++c)
            raw(r, c) = raw(r, c) * ts.norm_scale[c] + ts.norm_offset[c];
    return raw;
}

/// Number of RK4 substeps per sample: the integration step never exceeds a
/// three-hundredth of a Lyapunov time.
inline std::size_t substeps_per_sample(double points_per_lyapunov) {
    return static_cast<std::size_t>(std::ceil(300.0 / points_per_lyapunov - 1e-9));
}

/// Seed-perturbed initial condition: default_ic plus U(-1e-2, 1e-2) per
/// coordinate.
inline State seeded_initial_condition(const SystemSpec &spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1e-2, 1e-2);
    State x = spec.default_ic;
    for (double &xi : x) xi += u(rng);
    return x;
}

/// Integrates past the transient from a seeded initial condition and samples
/// n_points at dt = 1 / (lle * points_per_lyapunov). The result is z-scored.
inline TimeSeries sample_trajectory(const SystemSpec &spec, double points_per_lyapunov,
                                    std::size_t n_points, std::uint64_t seed) {
    require(points_per_lyapunov > 0.0, "sample_trajectory: points_per_lyapunov must be positive");
    require(n_points >= 1, "sample_trajectory: n_points must be >= 1");
    require(spec.reference_lle > 0.0, "sample_trajectory: system '" + spec.name + "' has no reference exponent");

    const double dt_sample = spec.lyapunov_time() / points_per_lyapunov;
    const std::size_t sub = substeps_per_sample(points_per_lyapunov);
    const double dt_int = dt_sample / static_cast<double>(sub);

    State x = seeded_initial_condition(spec, seed);
    detail::check_finite_state(x, 0, spec.name);
    detail::Rk4Workspace w(spec.dim);
    const auto transient_steps = static_cast<std::size_t>(std::llround(spec.transient_time / dt_int));
    detail::advance(spec, x, dt_int, transient_steps, w);

    TimeSeries ts;
    ts.values = Matrix(n_points, spec.dim);
    std::copy(x.begin(), x.end(), ts.values.row(0).begin());
    for (std::size_t i = 1; i < n_points; ++i) {
        detail::advance(spec, x, dt_int, sub, w, transient_steps + (i - 1) * sub);
        std::copy(x.begin(), x.end(), ts.values.row(i).begin());
    }
    ts.dt = dt_sample;
    ts.points_per_lyapunov = points_per_lyapunov;
    ts.source = spec.name + ":seed=" + std::to_string(seed);
    return zscore(std::move(ts));
}

/// Adds i.i.d. N(0, level^2) noise to every entry. The result is no longer
/// exactly z-scored, so its normalized flag is cleared.
inline TimeSeries add_gaussian_noise(TimeSeries ts, double level, std::uint64_t seed) {
    require(level >= 0.0, "add_gaussian_noise: level must be >= 0");
    if (level == 0.0) return ts;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (double &v : ts.values.data()) v += level * n01(rng);
    if (!all_finite(ts.values.data())) throw NumericalError("add_gaussian_noise: non-finite output");
    ts.normalized = false;
    ts.source += ":noise=" + std::to_string(level);
    return ts;
}

} // namespace ctxparrot
