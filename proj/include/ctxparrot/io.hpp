#pragma once

// File formats: trajectory CSV + JSON sidecar, forecast CSV, metric-report
// JSON, sweep result CSV. Doubles are written with 17 significant digits so
// every value round-trips exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxparrot/core.hpp"
#include "ctxparrot/dynsys.hpp"
#include "ctxparrot/experiments.hpp"
#include "ctxparrot/metrics.hpp"

namespace ctxparrot::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
inline void atomic_write(const fs::path &path, const std::string &content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// CSV parsing

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; ///< 1-based source line of each row
};

inline std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline CsvTable parse_csv(const std::string &text, const std::string &origin = "csv") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        for (auto &c : cells) c = trim(c);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw InvalidArgument(origin + ": empty file");
    return t;
}

inline double parse_double(const std::string &cell, const std::string &origin, std::size_t lineno) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != cell.size() || !std::isfinite(v))
        throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": '" + cell + "' is not a finite number");
    return v;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryMeta {
    std::string system;
    double lle = 0.0;
    double dt = 1.0;
    double points_per_lyapunov = 30.0;
    std::uint64_t seed = 0;
    bool normalized = false;
    double noise = 0.0;
};

inline std::string trajectory_csv(const TimeSeries &ts) {
    std::string out = "t";
    for (std::size_t c = 0; c < ts.dim(); ++c) out += ",x" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < ts.size(); ++r) {
        out += fmt(static_cast<double>(r) * ts.dt);
        for (std::size_t c = 0; c < ts.dim(); ++c) {
            out += ',';
            out += fmt(ts.values(r, c));
        }
        out += '\n';
    }
    return out;
}

inline json to_json(const TrajectoryMeta &m) {
    return json{{"system", m.system}, {"lle", m.lle},   {"dt", m.dt}, {"points_per_lyapunov", m.points_per_lyapunov},
                {"seed", m.seed},     {"normalized", m.normalized}, {"noise", m.noise}};
}

inline TrajectoryMeta meta_from_json(const json &j) {
    TrajectoryMeta m;
    m.system = j.value("system", std::string{});
    m.lle = j.value("lle", 0.0);
    m.dt = j.value("dt", 1.0);
    m.points_per_lyapunov = j.value("points_per_lyapunov", 30.0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.normalized = j.value("normalized", false);
    m.noise = j.value("noise", 0.0);
    return m;
}

/// Sidecar metadata path: trajectory.csv -> trajectory.json.
inline fs::path sidecar_path(const fs::path &csv) {
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

inline void write_trajectory(const fs::path &csv, const TimeSeries &ts, const TrajectoryMeta &meta) {
    atomic_write(csv, trajectory_csv(ts));
    atomic_write(sidecar_path(csv), to_json(meta).dump(2) + "\n");
}

/// Reads a trajectory CSV (header `t,x0,x1,...`). All columns after the
/// first are values. Sampling metadata comes from the sidecar when present;
/// otherwise dt is inferred from the time column.
inline TimeSeries read_trajectory(const fs::path &csv) {
    const auto table = parse_csv(read_file(csv), csv.string());
    require(table.header.size() >= 2, csv.string() + ": need a time column and at least one value column");
    require(!table.rows.empty(), csv.string() + ": no data rows");
    TimeSeries ts;
    const std::size_t dim = table.header.size() - 1;
    ts.values = Matrix(table.rows.size(), dim);
    std::vector<double> t(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        t[r] = parse_double(table.rows[r][0], csv.string(), table.line_numbers[r]);
        for (std::size_t c = 0; c < dim; ++c)
            ts.values(r, c) = parse_double(table.rows[r][c + 1], csv.string(), table.line_numbers[r]);
    }
    ts.dt = t.size() >= 2 && t[1] > t[0] ? t[1] - t[0] : 1.0;
    ts.source = csv.string();
    if (fs::exists(sidecar_path(csv))) {
        const auto meta = meta_from_json(json::parse(read_file(sidecar_path(csv))));
        ts.dt = meta.dt;
        ts.points_per_lyapunov = meta.points_per_lyapunov;
        ts.normalized = meta.normalized;
        if (!meta.system.empty()) ts.source = meta.system;
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Forecasts

/// Forecast CSV: one row per (step, dimension) with columns
/// `t,dim,truth,pred`; truth is empty when unknown. t is model time after
/// the end of the context.
inline std::string forecast_csv(const Matrix &pred, const Matrix *truth, double dt) {
    std::string out = "t,dim,truth,pred\n";
    for (std::size_t c = 0; c < pred.cols(); ++c)
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            out += fmt(static_cast<double>(i + 1) * dt);
            out += ',' + std::to_string(c) + ',';
            if (truth) out += fmt((*truth)(i, c));
            out += ',' + fmt(pred(i, c)) + '\n';
        }
    return out;
}

struct ForecastTable {
    Matrix pred;
    Matrix truth;
    bool has_truth = true;
};

inline ForecastTable read_forecast(const fs::path &csv) {
    const auto table = parse_csv(read_file(csv), csv.string());
    require(table.header == std::vector<std::string>({"t", "dim", "truth", "pred"}),
            csv.string() + ":1: expected header t,dim,truth,pred");
    std::vector<std::vector<double>> pred_cols, truth_cols;
    bool has_truth = true;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &row = table.rows[r];
        const auto line = table.line_numbers[r];
        const double d = parse_double(row[1], csv.string(), line);
        require(d >= 0 && d == std::floor(d), csv.string() + ":" + std::to_string(line) + ": bad dim index");
        const auto c = static_cast<std::size_t>(d);
        if (c >= pred_cols.size()) {
            pred_cols.resize(c + 1);
            truth_cols.resize(c + 1);
        }
        pred_cols[c].push_back(parse_double(row[3], csv.string(), line));
        if (row[2].empty()) has_truth = false;
        else truth_cols[c].push_back(parse_double(row[2], csv.string(), line));
    }
    require(!pred_cols.empty(), csv.string() + ": no data rows");
    ForecastTable out;
    out.pred = Matrix::from_columns(pred_cols);
    out.has_truth = has_truth;
    if (has_truth) out.truth = Matrix::from_columns(truth_cols);
    return out;
}

// ---------------------------------------------------------------------------
// Metric reports and sweep results

inline json to_json(const metrics::MetricReport &m) {
    json j{{"metric", m.metric}, {"value", m.value}};
    j["horizon"] = m.horizon ? json(*m.horizon) : json(nullptr);
    j["settings"] = json::object();
    for (const auto &[k, v] : m.settings) j["settings"][k] = v;
    return j;
}

inline metrics::MetricReport metric_from_json(const json &j) {
    metrics::MetricReport m;
    m.metric = j.at("metric").get<std::string>();
    m.value = j.at("value").get<double>();
    if (j.contains("horizon") && !j["horizon"].is_null()) m.horizon = j["horizon"].get<double>();
    if (j.contains("settings"))
        for (const auto &[k, v] : j["settings"].items()) m.settings[k] = v.get<double>();
    return m;
}

inline std::string sweep_csv(const std::vector<SweepResult> &results) {
    std::string out = "system,L,seed,method,metric,value,horizon\n";
    auto row = [&](const SweepResult &r, const std::string &metric, double value, std::optional<double> horizon) {
        out += r.system + ',' + std::to_string(r.L) + ',' + std::to_string(r.seed) + ',' + r.method + ',' + metric +
               ',' + fmt(value) + ',' + (horizon ? fmt(*horizon) : std::string{}) + '\n';
    };
    for (const auto &r : results) {
        row(r, "one_step_error", r.one_step_error, std::nullopt);
        if (r.nn_distance) row(r, "nn_distance", *r.nn_distance, std::nullopt);
        for (const auto &m : r.metrics) row(r, m.metric, m.value, m.horizon);
    }
    return out;
}

} // namespace ctxparrot::io
