#include <gtest/gtest.h>

#include <cmath>

#include "ctxparrot/dynsys.hpp"
#include "ctxparrot/stats.hpp"
#include "ctxparrot/systems.hpp"

using namespace ctxparrot;

namespace {

SystemSpec decay() {
    return {"decay", 1, [](std::span<const double> x, std::span<double> d) { d[0] = -x[0]; }, {1.0}, 0.0, 0.0};
}

// Plain RK4 written out separately from the library integrator.
void rk4(const SystemSpec &s, std::vector<double> &x, double h) {
    const std::size_t n = x.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), t(n);
    s.vector_field(x, k1);
    for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + 0.5 * h * k1[i];
    s.vector_field(t, k2);
    for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + 0.5 * h * k2[i];
    s.vector_field(t, k3);
    for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + h * k3[i];
    s.vector_field(t, k4);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

// Two nearby trajectories, renormalized to d0 every unit of model time.
double two_trajectory_lle(const SystemSpec &s, double t_total) {
    const double h = default_integration_step(s), d0 = 1e-8, interval = 1.0;
    std::vector<double> a = s.default_ic;
    for (double t = 0; t < s.transient_time; t += h) rk4(s, a, h);
    std::vector<double> b = a;
    b[0] += d0;
    const auto steps = static_cast<std::size_t>(std::round(interval / h));
    const auto rounds = static_cast<std::size_t>(std::ceil(t_total / interval));
    double acc = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t k = 0; k < steps; ++k) rk4(s, a, h), rk4(s, b, h);
        double d = 0;
        for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
        d = std::sqrt(d);
        acc += std::log(d / d0);
        for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + (b[i] - a[i]) * d0 / d;
    }
    return acc / (static_cast<double>(rounds * steps) * h);
}

} // namespace

TEST(Rk4, LinearDecay) {
    const auto m = integrate_rk4(decay(), std::vector<double>{1.0}, 0.1, 10);
    ASSERT_EQ(m.rows(), 11u);
    EXPECT_NEAR(m(10, 0), std::exp(-1.0), 1e-6);
}

TEST(Rk4, ZeroFieldIsExact) {
    const SystemSpec still{"still", 1, [](std::span<const double>, std::span<double> d) { d[0] = 0; }, {3.5}, 0, 0};
    const auto m = integrate_rk4(still, std::vector<double>{3.5}, 0.37, 25);
    for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_EQ(m(r, 0), 3.5);
}

TEST(Rk4, FourthOrderConvergence) {
    // Halving dt cuts the global error by about 2^4.
    const double exact = std::exp(-2.0);
    const double e1 = std::abs(integrate_rk4(decay(), std::vector<double>{1.0}, 0.2, 10)(10, 0) - exact);
    const double e2 = std::abs(integrate_rk4(decay(), std::vector<double>{1.0}, 0.1, 20)(20, 0) - exact);
    EXPECT_GT(e1 / e2, 12.0);
    EXPECT_LT(e1 / e2, 20.0);
}

TEST(Rk4, LorenzBoundedAndAgreesWithHalfStep) {
    const auto s = systems::lorenz();
    const auto m = integrate_rk4(s, std::vector<double>{1, 1, 1}, 0.01, 10'000);
    double mx = 0, mz = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        mx = std::max(mx, std::abs(m(r, 0)));
        mz = std::max(mz, std::abs(m(r, 2)));
    }
    EXPECT_LT(mx, 25.0);
    EXPECT_LT(mz, 55.0);
    const auto half = integrate_rk4(s, std::vector<double>{1, 1, 1}, 0.005, 2'000);
    const auto full = integrate_rk4(s, std::vector<double>{1, 1, 1}, 0.01, 1'000);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(half(2'000, c), full(1'000, c), 1e-2);
}

TEST(Rk4, DivergenceReportsStep) {
    const SystemSpec blow{"blow", 1, [](std::span<const double> x, std::span<double> d) { d[0] = x[0] * x[0]; },
                          {1.0}, 0.0, 0.0};
    try {
        integrate_rk4(blow, std::vector<double>{1.0}, 0.1, 1000);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError &e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(Benettin, ContractingFlowIsNegative) {
    EXPECT_LT(estimate_lle_benettin(decay(), 50.0, 1.0, 0.01).value, 0.0);
}

TEST(Benettin, LorenzAgreesWithTwoTrajectoryOracle) {
    const auto s = systems::lorenz();
    const double t = 500.0 * s.lyapunov_time();
    const double oracle = two_trajectory_lle(s, t);
    const double est = estimate_lle_benettin(s, t, 1.0).value;
    EXPECT_NEAR(oracle, 0.906, 0.05);
    EXPECT_NEAR(est, 0.906, 0.05);
    EXPECT_NEAR(est, oracle, 0.05);
}

TEST(Benettin, RosslerAgreesWithTwoTrajectoryOracle) {
    const auto s = systems::rossler();
    const double t = 500.0 * s.lyapunov_time();
    const double oracle = two_trajectory_lle(s, t);
    const double est = estimate_lle_benettin(s, t, 1.0).value;
    EXPECT_NEAR(oracle, 0.071, 0.01);
    EXPECT_NEAR(est, 0.071, 0.01);
}

TEST(Sampling, NormalizedAndDeterministic) {
    const auto s = systems::lorenz();
    const auto a = sample_trajectory(s, 30.0, 100'000, 3);
    EXPECT_NEAR(a.dt, 1.0 / (30.0 * 0.906), 1e-15);
    EXPECT_TRUE(a.normalized);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto col = a.column(c);
        EXPECT_NEAR(stats::mean(col), 0.0, 1e-10);
        EXPECT_NEAR(stats::stddev(col), 1.0, 1e-10);
    }
    EXPECT_EQ(a.values, sample_trajectory(s, 30.0, 100'000, 3).values);
    EXPECT_FALSE(a.values == sample_trajectory(s, 30.0, 100'000, 4).values);
}

TEST(Sampling, GranularityScalesDt) {
    const auto s = systems::lorenz();
    EXPECT_NEAR(sample_trajectory(s, 10.0, 10, 0).dt / sample_trajectory(s, 50.0, 10, 0).dt, 5.0, 1e-12);
}

TEST(Sampling, FinerGridContainsCoarserGrid) {
    // Same integration step at 30 and 60 points per Lyapunov time, so every
    // second fine sample is a coarse sample.
    const auto s = systems::lorenz();
    const auto coarse = denormalized(sample_trajectory(s, 30.0, 500, 9));
    const auto fine = denormalized(sample_trajectory(s, 60.0, 999, 9));
    for (std::size_t i = 0; i < 500; ++i)
        for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(coarse(i, c), fine(2 * i, c), 1e-6);
}

TEST(Sampling, RejectsBadArguments) {
    EXPECT_THROW(sample_trajectory(systems::lorenz(), 0.0, 10, 0), InvalidArgument);
    EXPECT_THROW(sample_trajectory(systems::lorenz(), 30.0, 0, 0), InvalidArgument);
}

TEST(Noise, ZeroLevelIsIdentity) {
    const auto ts = sample_trajectory(systems::lorenz(), 30.0, 1000, 1);
    const auto out = add_gaussian_noise(ts, 0.0, 5);
    EXPECT_EQ(out.values, ts.values);
    EXPECT_TRUE(out.normalized);
}

TEST(Noise, LevelMatchesEmpiricalStd) {
    TimeSeries ts;
    ts.values = Matrix(100'000, 1);
    const auto out = add_gaussian_noise(ts, 0.1, 17);
    EXPECT_NEAR(stats::stddev(out.values.column(0)), 0.1, 0.003);
    EXPECT_EQ(out.values, add_gaussian_noise(ts, 0.1, 17).values);
    EXPECT_FALSE(out.normalized);
}

TEST(Zscore, ConstantColumnAndRoundTrip) {
    TimeSeries ts;
    ts.values = Matrix(4, 2);
    for (std::size_t r = 0; r < 4; ++r) ts.values(r, 0) = 7.0, ts.values(r, 1) = static_cast<double>(r);
    const auto z = zscore(ts);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(z.values(r, 0), 0.0);
    const auto raw = denormalized(zscore(z));
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(raw(r, 1), static_cast<double>(r), 1e-12);
}
