#include "c2f/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "c2f/error.hpp"

namespace c2f {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
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

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
};

struct Frame {
    Range xr, yr;
    double px(double x) const { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); }
};

std::string open(const std::string& title) {
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n",
        kWidth, kHeight, kWidth, kHeight);
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       (kWidth - kRight + kLeft) / 2, escape(title));
    return out;
}

std::string axes(const Frame& f, const std::string& xl, const std::string& yl) {
    std::string out;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", x0, y1,
                       x1 - x0, y0 - y1);
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.xr.lo + (f.xr.hi - f.xr.lo) * i / 4, yv = f.yr.lo + (f.yr.hi - f.yr.lo) * i / 4;
        out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", f.px(xv), y0 + 16, xv);
        out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", x0 - 6, f.py(yv) + 4, yv);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2, kHeight - 12,
                       escape(xl));
    out += fmt::format("<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
                       (y0 + y1) / 2, (y0 + y1) / 2, escape(yl));
    return out;
}

std::string legend_entry(std::size_t i, const std::string& name) {
    const double y = kTop + 10 + 20 * static_cast<double>(i);
    return fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>"
        "<text x=\"{}\" y=\"{}\">{}</text>\n",
        kWidth - kRight + 14, y - 10, kPalette[i % 6], kWidth - kRight + 32, y, escape(name));
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const Series> series) {
    Frame f;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw Error("line_chart: series '" + s.name + "' has mismatched x/y");
        for (double v : s.x) f.xr.add(v);
        for (double v : s.y) f.yr.add(v);
    }
    f.xr.finish();
    f.yr.finish();
    std::string out = open(title) + axes(f, x_label, y_label);
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::string pts;
        for (std::size_t k = 0; k < series[i].x.size(); ++k) {
            if (!std::isfinite(series[i].y[k])) continue;
            pts += fmt::format("{:.2f},{:.2f} ", f.px(series[i].x[k]), f.py(series[i].y[k]));
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                           kPalette[i % 6], pts);
        out += legend_entry(i, series[i].name);
    }
    return out + "</svg>\n";
}

std::string scatter_chart(const std::string& title, std::span<const double> points, std::size_t dims,
                          std::span<const int> labels, std::span<const std::string> class_names) {
    if (dims != 2 && dims != 3) throw Error("scatter_chart: dims must be 2 or 3");
    if (points.size() != labels.size() * dims) throw Error("scatter_chart: point/label count mismatch");
    // Oblique projection for the third axis.
    const double cx = 0.5 * std::cos(0.5236), cy = 0.5 * std::sin(0.5236);
    std::vector<double> px(labels.size()), py(labels.size());
    Frame f;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* p = points.data() + i * dims;
        px[i] = p[0] + (dims == 3 ? cx * p[2] : 0.0);
        py[i] = p[1] + (dims == 3 ? cy * p[2] : 0.0);
        f.xr.add(px[i]);
        f.yr.add(py[i]);
    }
    f.xr.finish();
    f.yr.finish();
    std::string out = open(title) + axes(f, dims == 3 ? "x + z/2 cos 30" : "x", dims == 3 ? "y + z/2 sin 30" : "y");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(std::max(0, labels[i]));
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                           f.px(px[i]), f.py(py[i]), kPalette[c % 6]);
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) out += legend_entry(c, class_names[c]);
    return out + "</svg>\n";
}

}  // namespace c2f
