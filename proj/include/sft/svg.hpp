#pragma once

// Minimal static SVG line charts for survival, SIC and capacity curves.

#include <sft/detail/text.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sft {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    /// Draw as a right-continuous step function rather than joining points.
    bool step = true;
};

struct PlotSpec {
    std::string title;
    std::string x_label = "t (ms)";
    std::string y_label;
    std::vector<PlotSeries> series;
    /// Optional horizontal reference line (e.g. 0 for SIC, 1 for capacity).
    std::optional<double> reference_y;
    int width = 640;
    int height = 400;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace detail

inline void write_svg_plot(std::ostream& out, const PlotSpec& spec) {
    constexpr double left = 60, right = 20, top = 40, bottom = 50;
    const double w = spec.width, h = spec.height;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : spec.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (spec.reference_y) {
        y0 = std::min(y0, *spec.reference_y);
        y1 = std::max(y1, *spec.reference_y);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
    const auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };
    const auto num = [](double v) { return detail::format_fixed(v, 2); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << detail::xml_escape(spec.title) << "</text>\n";
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(h - bottom) << "\" x2=\"" << num(w - right) << "\" y2=\""
        << num(h - bottom) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(h - bottom) << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(h - bottom + 16) << "\" text-anchor=\"middle\">"
            << detail::format_fixed(xv, 0) << "</text>\n";
        out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
            << detail::format_fixed(yv, 2) << "</text>\n";
    }
    out << "<text x=\"" << num(w / 2) << "\" y=\"" << num(h - 10) << "\" text-anchor=\"middle\">"
        << detail::xml_escape(spec.x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << num(h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << num(h / 2)
        << ")\">" << detail::xml_escape(spec.y_label) << "</text>\n";
    if (spec.reference_y)
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(*spec.reference_y)) << "\" x2=\"" << num(w - right)
            << "\" y2=\"" << num(py(*spec.reference_y)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const auto& ser = spec.series[s];
        const char* color = palette[s % std::size(palette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        double prev_y = 0;
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) continue;
            if (ser.step && !first) out << num(px(ser.x[i])) << ',' << num(py(prev_y)) << ' ';
            out << num(px(ser.x[i])) << ',' << num(py(ser.y[i])) << ' ';
            prev_y = ser.y[i];
            first = false;
        }
        out << "\"/>\n";
        out << "<text x=\"" << num(w - right - 4) << "\" y=\"" << num(top + 14 * (s + 1)) << "\" text-anchor=\"end\" fill=\""
            << color << "\">" << detail::xml_escape(ser.name) << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace sft
