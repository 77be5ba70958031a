#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <sstream>

#include "ctxparrot/cli.hpp"

using namespace ctxparrot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const fs::path p = fs::path(::testing::TempDir()) / ("ctxparrot_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(std::vector<std::string> args, std::string *err_out = nullptr) {
    args.insert(args.begin(), "ctxparrot");
    std::vector<const char *> argv;
    for (auto &a : args) argv.push_back(a.c_str());
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), err);
    if (err_out) *err_out = err.str();
    return code;
}

std::size_t count_lines(const std::string &s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(Csv, TrajectoryRoundTripIsExact) {
    const auto dir = scratch("traj");
    const auto ts = sample_trajectory(systems::rossler(), 30.0, 500, 4);
    io::write_trajectory(dir / "t.csv", ts, {"rossler", 0.0717, ts.dt, 30.0, 4, true, 0.0});
    const auto back = io::read_trajectory(dir / "t.csv");
    EXPECT_EQ(back.values, ts.values);
    EXPECT_EQ(back.dt, ts.dt);
    EXPECT_EQ(back.points_per_lyapunov, 30.0);
    EXPECT_FALSE(fs::exists(dir / "t.csv.tmp"));
}

TEST(Csv, ErrorsCarryLineNumbers) {
    try {
        io::parse_csv("t,x0\n0,1\n1,2,3\n", "bad.csv");
        FAIL();
    } catch (const InvalidArgument &e) {
        EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos);
    }
    const auto dir = scratch("badnum");
    io::atomic_write(dir / "x.csv", "t,x0\n0,1\n1,abc\n");
    try {
        io::read_trajectory(dir / "x.csv");
        FAIL();
    } catch (const InvalidArgument &e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
    }
}

TEST(Config, FileOverridesFlagsAndReportsAllProblems) {
    const auto dir = scratch("cfg");
    io::atomic_write(dir / "a.cfg", "# comment\nseeds = 2\nsystems = lorenz\n");
    std::vector<std::string> errs;
    cli::RunConfig cfg;
    cli::apply_entry(cfg, "seeds", "9", "--", errs);
    cli::apply_config_text(cfg, io::read_file(dir / "a.cfg"), "a.cfg", errs);
    EXPECT_TRUE(errs.empty());
    EXPECT_EQ(cfg.seeds, 2u);
    EXPECT_EQ(cfg.systems, std::vector<std::string>{"lorenz"});

    cli::apply_config_text(cfg, "colour = red\nseeds = many\nno equals sign\nembed-dim = 4\n", "b.cfg", errs);
    ASSERT_EQ(errs.size(), 3u);
    EXPECT_NE(errs[0].find("b.cfg:1"), std::string::npos);
    EXPECT_NE(errs[1].find("b.cfg:2"), std::string::npos);
    EXPECT_NE(errs[2].find("b.cfg:3"), std::string::npos);
    EXPECT_EQ(cfg.D, 4u);
}

TEST(Cli, SimulateWritesDeterministicFiles) {
    const auto dir = scratch("sim");
    ASSERT_EQ(run({"simulate", "--system", "lorenz", "--n", "100000", "--ppl", "30", "--seed", "7", "--out",
                   (dir / "a").string()}),
              0);
    ASSERT_EQ(run({"simulate", "--system", "lorenz", "--n", "100000", "--ppl", "30", "--seed", "7", "--out",
                   (dir / "b").string()}),
              0);
    const auto a = io::read_file(dir / "a" / "trajectory.csv");
    EXPECT_EQ(count_lines(a), 100'001u);
    EXPECT_EQ(a.substr(0, a.find('\n')), "t,x0,x1,x2");
    EXPECT_EQ(a, io::read_file(dir / "b" / "trajectory.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "trajectory.json"));
    const auto m = io::json::parse(io::read_file(dir / "a" / "manifest.json"));
    EXPECT_EQ(m["master_seed"], 7);
    EXPECT_EQ(m["config"]["n"], 100000);
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, ExitCodes) {
    std::string err;
    EXPECT_EQ(run({"simulate", "--ppl", "0"}, &err), 2);
    EXPECT_NE(err.find("ppl"), std::string::npos);
    EXPECT_NE(err.find("--help"), std::string::npos);
    EXPECT_EQ(run({"simulate", "--system", "duffing"}, &err), 2);
    EXPECT_NE(err.find("lorenz, rossler"), std::string::npos);
    EXPECT_EQ(run({"forecast", "--input", "/nonexistent/x.csv", "--out", scratch("miss").string()}), 2);
    EXPECT_EQ(run({"forecast", "--method", "oracle", "--out", scratch("m").string()}), 2);
    EXPECT_EQ(run({"frobnicate"}), 2);
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"sweep", "--help"}), 0);
}

TEST(Cli, MalformedCsvReportsLine) {
    const auto dir = scratch("malformed");
    io::atomic_write(dir / "in.csv", "t,x0\n0,1\n1,2\n2,oops\n");
    std::string err;
    EXPECT_EQ(run({"forecast", "--input", (dir / "in.csv").string(), "-L", "3", "-D", "1", "--out", dir.string()},
                  &err),
              2);
    EXPECT_NE(err.find(":4:"), std::string::npos);
}

TEST(Cli, ConstantInputGivesConstantForecast) {
    const auto dir = scratch("const");
    std::string csv = "t,x0\n";
    for (int i = 0; i < 100; ++i) csv += std::to_string(i) + ",1.5\n";
    io::atomic_write(dir / "in.csv", csv);
    ASSERT_EQ(run({"forecast", "--input", (dir / "in.csv").string(), "-L", "60", "-H", "20", "--out", dir.string()}),
              0);
    const auto f = io::read_forecast(dir / "forecast.csv");
    for (std::size_t i = 0; i < f.pred.rows(); ++i) EXPECT_EQ(f.pred(i, 0), 1.5);
}

TEST(Cli, ForecastMatchesLibraryAndEvaluateMatchesPipeline) {
    const auto dir = scratch("roundtrip");
    ASSERT_EQ(run({"simulate", "--system", "lorenz", "--n", "2000", "--seed", "3", "--out", dir.string()}), 0);
    ASSERT_EQ(run({"forecast", "--input", (dir / "trajectory.csv").string(), "-L", "512", "-D", "5", "-H", "300",
                   "--out", (dir / "fc").string()}),
              0);
    ASSERT_EQ(run({"evaluate", "--input", (dir / "fc" / "forecast.csv").string(), "--out", (dir / "ev").string()}), 0);

    // Same pipeline in process.
    const auto ts = sample_trajectory(systems::lorenz(), 30.0, 2000, 3);
    const std::size_t start = 2000 - 512 - 300;
    const Matrix ctx = ts.values.slice_rows(start, 512), truth = ts.values.slice_rows(start + 512, 300);
    const auto fc = forecast_each_dimension(ctx, {5, 300, std::nullopt}, {Method::parrot});
    EXPECT_EQ(io::read_file(dir / "fc" / "forecast.csv"), io::forecast_csv(fc.prediction, &truth, ts.dt));

    EvalOptions eval;
    const auto expected = evaluate_forecast(truth, fc.prediction, eval);
    const auto j = io::json::parse(io::read_file(dir / "ev" / "metrics.json"));
    ASSERT_EQ(j["metrics"].size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto got = io::metric_from_json(j["metrics"][i]);
        EXPECT_EQ(got.metric, expected[i].metric);
        EXPECT_NEAR(got.value, expected[i].value, 1e-12) << got.metric;
    }
    const auto svg = io::read_file(dir / "fc" / "forecast.svg");
    EXPECT_NE(svg.find("matched motif"), std::string::npos);
    EXPECT_EQ(svg.find("NaN"), std::string::npos);
}

TEST(Cli, QuickstartSweepIsFastAndReproducible) {
    const auto dir = scratch("quick");
    const std::string cfg = std::string(CTXPARROT_SOURCE_DIR) + "/configs/quickstart.cfg";
    const auto t0 = std::chrono::steady_clock::now();
    ASSERT_EQ(run({"sweep", "--config", cfg, "--out", (dir / "a").string()}), 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 60.0);
    for (const char *f : {"results.csv", "manifest.json", "summary.svg"}) EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
    ASSERT_EQ(run({"sweep", "--config", cfg, "--out", (dir / "b").string()}), 0);
    EXPECT_EQ(io::read_file(dir / "a" / "results.csv"), io::read_file(dir / "b" / "results.csv"));
    EXPECT_EQ(io::read_file(dir / "a" / "summary.svg"), io::read_file(dir / "b" / "summary.svg"));
    const auto ma = io::json::parse(io::read_file(dir / "a" / "manifest.json"));
    const auto mb = io::json::parse(io::read_file(dir / "b" / "manifest.json"));
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    EXPECT_EQ(ma["config"]["seeds"], 3);
}

TEST(Cli, PreflightListsOffendingCells) {
    const auto dir = scratch("preflight");
    std::string err;
    EXPECT_EQ(run({"sweep", "--systems", "lorenz", "--context-lengths", "8,12,300", "--seeds", "1", "--out",
                   dir.string()},
                  &err),
              2);
    EXPECT_NE(err.find("L=8"), std::string::npos);
    EXPECT_NE(err.find("L=12"), std::string::npos);
    EXPECT_EQ(err.find("L=300"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "results.csv"));
}

TEST(Cli, OutputRootFromEnvironment) {
    const auto dir = scratch("envroot");
    ::setenv(cli::kOutEnv, dir.string().c_str(), 1);
    EXPECT_EQ(run({"simulate", "--n", "50"}), 0);
    ::unsetenv(cli::kOutEnv);
    EXPECT_TRUE(fs::exists(dir / "simulate" / "trajectory.csv"));
}

TEST(Cli, BinaryExitCodes) {
    const std::string bin = CTXPARROT_CLI_PATH;
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " simulate --ppl 0 2>/dev/null").c_str())), 2);
    const auto dir = scratch("bin");
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " simulate --n 10 --out " + dir.string()).c_str())), 0);
}
