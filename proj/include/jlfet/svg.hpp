#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "io.hpp"
#include "iv_curve.hpp"
#include "sweep.hpp"

namespace jlfet {
namespace detail {

// Minimal chart canvas: fixed frame, nice decimal ticks, polyline series.
// Self-contained SVG so the files open anywhere.
class SvgChart {
public:
    SvgChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void set_range(double x0, double x1, double y0, double y1) {
        if (x1 <= x0) x1 = x0 + 1;
        if (y1 <= y0) y1 = y0 + (std::abs(y0) > 0 ? std::abs(y0) * 0.1 : 1);
        x0_ = x0, x1_ = x1, y0_ = y0, y1_ = y1;
    }

    void add_polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                      const std::string& color, bool markers) {
        series_.push_back({xs, ys, color, markers});
    }

    void add_annotation(std::string text) { annotations_.push_back(std::move(text)); }

    std::string render() const {
        std::string s;
        s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
             "\" height=\"" + std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) +
             " " + std::to_string(H) + "\">\n";
        s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        s += text(W / 2, 24, title_, 16, "middle", false);

        // frame
        s += "<rect x=\"" + fmt(ML) + "\" y=\"" + fmt(MT) + "\" width=\"" + fmt(W - ML - MR) +
             "\" height=\"" + fmt(H - MT - MB) +
             "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";

        for (double t : ticks(x0_, x1_)) {
            const double px = sx(t);
            s += "<line x1=\"" + fmt(px) + "\" y1=\"" + fmt(H - MB) + "\" x2=\"" + fmt(px) +
                 "\" y2=\"" + fmt(MT) + "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
            s += text(px, H - MB + 18, fmt(round_tick(t)), 11, "middle", false);
        }
        for (double t : ticks(y0_, y1_)) {
            const double py = sy(t);
            s += "<line x1=\"" + fmt(ML) + "\" y1=\"" + fmt(py) + "\" x2=\"" + fmt(W - MR) +
                 "\" y2=\"" + fmt(py) + "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
            s += text(ML - 6, py + 4, fmt(round_tick(t)), 11, "end", false);
        }
        s += text(W / 2, H - 10, x_label_, 13, "middle", false);
        s += text(16, H / 2, y_label_, 13, "middle", true);

        for (const auto& sr : series_) {
            std::string pts;
            for (std::size_t k = 0; k < sr.xs.size(); ++k)
                pts += fmt(sx(sr.xs[k])) + "," + fmt(sy(sr.ys[k])) + " ";
            s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + sr.color +
                 "\" stroke-width=\"1.8\"/>\n";
            if (sr.markers)
                for (std::size_t k = 0; k < sr.xs.size(); ++k)
                    s += "<circle cx=\"" + fmt(sx(sr.xs[k])) + "\" cy=\"" + fmt(sy(sr.ys[k])) +
                         "\" r=\"2.6\" fill=\"" + sr.color + "\"/>\n";
        }
        int ay = MT + 18;
        for (const auto& a : annotations_) {
            s += text(W - MR - 8, ay, a, 12, "end", false);
            ay += 16;
        }
        s += "</svg>\n";
        return s;
    }

private:
    static constexpr int W = 640, H = 480, ML = 72, MR = 24, MT = 40, MB = 52;
    struct Series {
        std::vector<double> xs, ys;
        std::string color;
        bool markers;
    };
    std::string title_, x_label_, y_label_;
    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
    std::vector<Series> series_;
    std::vector<std::string> annotations_;

    double sx(double x) const { return ML + (x - x0_) / (x1_ - x0_) * (W - ML - MR); }
    double sy(double y) const { return H - MB - (y - y0_) / (y1_ - y0_) * (H - MT - MB); }

    static std::string fmt(double v) { return detail::fmt(v); }

    // Snap tick labels to the tick spacing so "0.30000000000000004" never shows.
    static double round_tick(double v) {
        return std::abs(v) < 1e-12 ? 0.0 : v;
    }

    static std::vector<double> ticks(double lo, double hi) {
        const double range = hi - lo;
        double step = std::pow(10.0, std::floor(std::log10(range / 5.0)));
        if (range / step > 10) step *= 2;
        if (range / step > 10) step *= 2.5;
        if (range / step > 10) step *= 2;
        std::vector<double> out;
        for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
            out.push_back(std::round(t / step) * step);
        return out;
    }

    static std::string text(double x, double y, const std::string& body, int size,
                            const char* anchor, bool vertical) {
        std::string esc;
        for (char c : body) {
            if (c == '<') esc += "&lt;";
            else if (c == '>') esc += "&gt;";
            else if (c == '&') esc += "&amp;";
            else esc += c;
        }
        std::string s = "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
                        std::to_string(size) + "\" text-anchor=\"" + anchor + "\" fill=\"#222\"";
        if (vertical)
            s += " transform=\"rotate(-90 " + fmt(x) + " " + fmt(y) + ")\"";
        return s + ">" + esc + "</text>\n";
    }
};

}  // namespace detail

// Transfer curves plot log10(I_d) (floored at 1e-18 A); output curves are
// linear in microamps.
inline void render_iv_svg(const IVCurve& curve, const std::filesystem::path& path) {
    std::vector<double> xs, ys;
    for (const auto& p : curve.points)
        if (p.converged && std::isfinite(p.I_d_A)) {
            xs.push_back(p.sweep_V);
            if (curve.kind == CurveKind::transfer)
                ys.push_back(std::log10(std::max(std::abs(p.I_d_A), 1e-18)));
            else
                ys.push_back(p.I_d_A * 1e6);
        }
    if (xs.empty()) throw std::invalid_argument("render_iv_svg: no converged points");

    const bool log_y = curve.kind == CurveKind::transfer;
    detail::SvgChart chart(
        log_y ? "Transfer characteristic" : "Output characteristic",
        log_y ? "V_g [V]" : "V_d [V]", log_y ? "log10(I_d [A])" : "I_d [uA]");
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double pad = (*ymax - *ymin) * 0.05;
    chart.set_range(*xmin, *xmax, *ymin - pad, *ymax + pad);
    chart.add_polyline(xs, ys, "#1060c0", true);
    chart.add_annotation(log_y ? "V_d = " + detail::fmt(curve.fixed_bias.V_d) + " V"
                               : "V_g = " + detail::fmt(curve.fixed_bias.V_g) + " V");
    write_text_file(chart.render(), path);
}

// Scatter of a metric vs the sweep axis plus the fitted line and its slope.
inline void render_trend_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                             const LinearTrend& trend, const std::string& x_label,
                             const std::string& y_label,
                             const std::filesystem::path& path) {
    if (xs.empty() || xs.size() != ys.size())
        throw std::invalid_argument("render_trend_svg: empty or mismatched data");
    detail::SvgChart chart("Trend: " + y_label + " vs " + x_label, x_label, y_label);
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double xp = (*xmax - *xmin) * 0.06, yp = (*ymax - *ymin) * 0.08;
    chart.set_range(*xmin - xp, *xmax + xp, *ymin - yp, *ymax + yp);
    const std::vector<double> fx{*xmin, *xmax};
    const std::vector<double> fy{trend.intercept + trend.slope * *xmin,
                                 trend.intercept + trend.slope * *xmax};
    chart.add_polyline(fx, fy, "#c03020", false);
    chart.add_polyline(xs, ys, "#1060c0", true);
    chart.add_annotation("slope = " + detail::fmt(trend.slope));
    chart.add_annotation("R^2 = " + detail::fmt(trend.r_squared));
    write_text_file(chart.render(), path);
}

}  // namespace jlfet
