#pragma once

// Built-in suite of chaotic flows. Reference exponents were measured with
// estimate_lle_benettin over 2e4 model-time units; tests/test_systems.cpp
// re-checks them.

#include <cmath>
#include <string>
#include <vector>

#include "ctxparrot/dynsys.hpp"

namespace ctxparrot::systems {

namespace detail {

inline SystemSpec make(std::string name, State ic, double lle, VectorField f) {
    SystemSpec s;
    s.name = std::move(name);
    s.dim = ic.size();
    s.default_ic = std::move(ic);
    s.vector_field = std::move(f);
    s.reference_lle = lle;
    s.transient_time = 20.0 / lle; // 20 Lyapunov times
    return s;
}

} // namespace detail

inline SystemSpec lorenz(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0) {
    return detail::make("lorenz", {1.0, 1.0, 1.0}, 0.906, [=](auto x, auto d) {
        d[0] = sigma * (x[1] - x[0]);
        d[1] = x[0] * (rho - x[2]) - x[1];
        d[2] = x[0] * x[1] - beta * x[2];
    });
}

inline SystemSpec rossler(double a = 0.2, double b = 0.2, double c = 5.7) {
    return detail::make("rossler", {1.0, 1.0, 0.0}, 0.0717, [=](auto x, auto d) {
        d[0] = -x[1] - x[2];
        d[1] = x[0] + a * x[1];
        d[2] = b + x[2] * (x[0] - c);
    });
}

inline SystemSpec thomas(double b = 0.05) {
    return detail::make("thomas", {0.1, 0.0, 0.0}, 0.1326, [=](auto x, auto d) {
        d[0] = std::sin(x[1]) - b * x[0];
        d[1] = std::sin(x[2]) - b * x[1];
        d[2] = std::sin(x[0]) - b * x[2];
    });
}

/// Chua's circuit with a piecewise-linear diode.
inline SystemSpec chua(double alpha = 15.6, double beta = 28.0, double m0 = -1.143, double m1 = -0.714) {
    return detail::make("chua", {0.7, 0.0, 0.0}, 0.425, [=](auto x, auto d) {
        const double h = m1 * x[0] + 0.5 * (m0 - m1) * (std::abs(x[0] + 1.0) - std::abs(x[0] - 1.0));
        d[0] = alpha * (x[1] - x[0] - h);
        d[1] = x[0] - x[1] + x[2];
        d[2] = -beta * x[1];
    });
}

inline SystemSpec halvorsen(double a = 1.4) {
    return detail::make("halvorsen", {1.0, 0.0, 0.0}, 0.682, [=](auto x, auto d) {
        d[0] = -a * x[0] - 4.0 * x[1] - 4.0 * x[2] - x[1] * x[1];
        d[1] = -a * x[1] - 4.0 * x[2] - 4.0 * x[0] - x[2] * x[2];
        d[2] = -a * x[2] - 4.0 * x[0] - 4.0 * x[1] - x[0] * x[0];
    });
}

inline SystemSpec chen(double a = 35.0, double b = 3.0, double c = 28.0) {
    return detail::make("chen", {-10.0, 0.0, 37.0}, 2.026, [=](auto x, auto d) {
        d[0] = a * (x[1] - x[0]);
        d[1] = (c - a) * x[0] - x[0] * x[2] + c * x[1];
        d[2] = x[0] * x[1] - b * x[2];
    });
}

inline SystemSpec aizawa(double a = 0.95, double b = 0.7, double c = 0.6, double dd = 3.5, double e = 0.25,
                         double f = 0.1) {
    return detail::make("aizawa", {0.1, 0.0, 0.0}, 0.0962, [=](auto x, auto d) {
        d[0] = (x[2] - b) * x[0] - dd * x[1];
        d[1] = dd * x[0] + (x[2] - b) * x[1];
        d[2] = c + a * x[2] - x[2] * x[2] * x[2] / 3.0 - (x[0] * x[0] + x[1] * x[1]) * (1.0 + e * x[2]) +
               f * x[2] * x[0] * x[0] * x[0];
    });
}

inline SystemSpec dadras(double a = 3.0, double b = 2.7, double c = 1.7, double dd = 2.0, double e = 9.0) {
    return detail::make("dadras", {1.1, 2.1, -2.0}, 0.364, [=](auto x, auto d) {
        d[0] = x[1] - a * x[0] + b * x[1] * x[2];
        d[1] = c * x[1] - x[0] * x[2] + x[2];
        d[2] = dd * x[0] * x[1] - e * x[2];
    });
}

inline SystemSpec sprott_b() {
    return detail::make("sprott_b", {0.05, 0.05, 0.05}, 0.211, [](auto x, auto d) {
        d[0] = x[1] * x[2];
        d[1] = x[0] - x[1];
        d[2] = 1.0 - x[0] * x[1];
    });
}

inline SystemSpec rucklidge(double k = 2.0, double lam = 6.7) {
    return detail::make("rucklidge", {1.0, 0.0, 4.5}, 0.193, [=](auto x, auto d) {
        d[0] = -k * x[0] + lam * x[1] - x[1] * x[2];
        d[1] = x[0];
        d[2] = -x[2] + x[1] * x[1];
    });
}

/// Jerk form of the double-scroll attractor.
inline SystemSpec double_scroll(double a = 0.8) {
    return detail::make("double_scroll", {0.01, 0.01, 0.0}, 0.0508, [=](auto x, auto d) {
        const double sgn = (x[0] > 0.0) - (x[0] < 0.0);
        d[0] = x[1];
        d[1] = x[2];
        d[2] = -a * (x[2] + x[1] + x[0] - sgn);
    });
}

inline SystemSpec lorenz96(std::size_t n = 5, double forcing = 16.0) {
    State ic(n, forcing);
    ic[0] += 0.01;
    return detail::make("lorenz96", std::move(ic), 1.966, [=](auto x, auto d) {
        for (std::size_t i = 0; i < n; ++i) {
            const double xp1 = x[(i + 1) % n];
            const double xm1 = x[(i + n - 1) % n];
            const double xm2 = x[(i + n - 2) % n];
            d[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
        }
    });
}

/// The twelve built-in systems, in a fixed order.
inline std::vector<SystemSpec> builtin() {
    return {lorenz(),    rossler(),   thomas(), chua(),      halvorsen(),     chen(),
            aizawa(),    dadras(),    sprott_b(), rucklidge(), double_scroll(), lorenz96()};
}

inline std::vector<std::string> builtin_names() {
    std::vector<std::string> names;
    for (const auto &s : builtin()) names.push_back(s.name);
    return names;
}

/// Looks up a built-in system by name; throws InvalidArgument listing the
/// registered names when absent.
inline SystemSpec find(const std::string &name) {
    for (auto &s : builtin())
        if (s.name == name) return s;
    std::string known;
    for (const auto &n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown system '" + name + "'; registered systems: " + known);
}

} // namespace ctxparrot::systems
