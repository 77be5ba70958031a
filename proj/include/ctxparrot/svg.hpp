#pragma once

// Minimal static SVG line plots. Output depends only on the data: fixed
// canvas, fixed palette, no timestamps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace ctxparrot::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = false;
    bool line = true;
};

/// Shaded x-interval, e.g. a matched motif.
struct Band {
    double x0 = 0.0, x1 = 0.0;
    std::string label;
    std::string color = "#ffd54f";
};

struct Plot {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    double width = 800, height = 450;
    std::vector<Series> series;
    std::vector<Band> bands;
    std::vector<std::string> legend_notes;

    std::string render() const;
};

inline const std::vector<std::string> &palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                               "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
    return p;
}

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string &s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace detail

inline std::string Plot::render() const {
    const double ml = 70, mr = 200, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto tx = [&](double v) { return logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return logy ? std::log10(v) : v; };

    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto &s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((logx && s.x[i] <= 0) || (logy && s.y[i] <= 0) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };
    using detail::num;

    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(ml) + "\" y=\"24\" font-size=\"15\">" + detail::escape(title) + "</text>\n";
    for (const auto &b : bands) {
        const double a = std::clamp(px(b.x0), ml, ml + pw), c = std::clamp(px(b.x1), ml, ml + pw);
        o += "<rect x=\"" + num(a) + "\" y=\"" + num(mt) + "\" width=\"" + num(std::max(0.0, c - a)) + "\" height=\"" +
             num(ph) + "\" fill=\"" + b.color + "\" fill-opacity=\"0.35\"><title>" + detail::escape(b.label) +
             "</title></rect>\n";
    }
    o += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
        const double vx = logx ? std::pow(10.0, fx) : fx, vy = logy ? std::pow(10.0, fy) : fy;
        const double sx = ml + pw * i / 4.0, sy = mt + ph - ph * i / 4.0;
        o += "<text x=\"" + num(sx) + "\" y=\"" + num(mt + ph + 16) + "\" text-anchor=\"middle\">" + detail::tick(vx) +
             "</text>\n";
        o += "<text x=\"" + num(ml - 6) + "\" y=\"" + num(sy + 4) + "\" text-anchor=\"end\">" + detail::tick(vy) +
             "</text>\n";
    }
    o += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(height - 12) + "\" text-anchor=\"middle\">" +
         detail::escape(xlabel) + "</text>\n";
    o += "<text transform=\"translate(16," + num(mt + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         detail::escape(ylabel) + "</text>\n";

    double ly = mt + 10;
    for (const auto &s : series) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((logx && s.x[i] <= 0) || (logy && s.y[i] <= 0) || !std::isfinite(s.y[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
            if (s.markers)
                o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + s.color +
                     "\"/>\n";
        }
        if (s.line && !pts.empty())
            o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
                 (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
        if (!s.label.empty()) {
            o += "<line x1=\"" + num(ml + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(ml + pw + 32) + "\" y2=\"" +
                 num(ly) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
                 (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
            o += "<text x=\"" + num(ml + pw + 38) + "\" y=\"" + num(ly + 4) + "\">" + detail::escape(s.label) +
                 "</text>\n";
            ly += 18;
        }
    }
    for (const auto &note : legend_notes) {
        o += "<text x=\"" + num(ml + pw + 12) + "\" y=\"" + num(ly + 4) + "\">" + detail::escape(note) + "</text>\n";
        ly += 18;
    }
    o += "</svg>\n";
    return o;
}

} // namespace ctxparrot::svg
