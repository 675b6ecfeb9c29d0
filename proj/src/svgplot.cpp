#include "ecrank/svgplot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ecrank/errors.hpp"

namespace ecrank {

const std::string& class_color(int v) {
    static const std::array<std::string, 8> palette = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return palette[static_cast<std::size_t>(v) % palette.size()];
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

// ~5 round tick values covering [lo, hi]
std::vector<double> ticks(double lo, double hi) {
    if (!(hi > lo)) {
        return {lo};
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> out;
    const double first = std::ceil(lo / step) * step;
    for (double t = first; t <= hi + step * 1e-9; t += step) {
        out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    }
    return out;
}

} // namespace

std::string LinePlot::render() const {
    const double ml = 62, mr = 16, mt = title.empty() ? 16 : 34, mb = 46;
    const double pw = width - ml - mr;
    const double ph = height - mt - mb;

    double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    bool have = false;
    for (const PlotSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double xv = log_x ? std::log10(std::max(s.x[i], 1e-300)) : s.x[i];
            if (!have) {
                x_lo = x_hi = xv;
                y_lo = y_hi = s.y[i];
                have = true;
            } else {
                x_lo = std::min(x_lo, xv);
                x_hi = std::max(x_hi, xv);
                y_lo = std::min(y_lo, s.y[i]);
                y_hi = std::max(y_hi, s.y[i]);
            }
        }
    }
    if (x_hi == x_lo) {
        x_hi = x_lo + 1;
    }
    if (y_hi == y_lo) {
        y_hi = y_lo + 1;
    }
    const double y_pad = (y_hi - y_lo) * 0.05;
    y_lo -= y_pad;
    y_hi += y_pad;

    const auto sx = [&](double v) {
        const double xv = log_x ? std::log10(std::max(v, 1e-300)) : v;
        return ml + (xv - x_lo) / (x_hi - x_lo) * pw;
    };
    const auto sy = [&](double v) { return mt + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    if (!title.empty()) {
        svg << "<text x=\"" << fmt2(ml + pw / 2)
            << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"14\">"
            << escape(title) << "</text>\n";
    }

    // axes box and ticks
    svg << "<rect x=\"" << fmt2(ml) << "\" y=\"" << fmt2(mt) << "\" width=\"" << fmt2(pw)
        << "\" height=\"" << fmt2(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (const double t : ticks(x_lo, x_hi)) {
        const double px = ml + (t - x_lo) / (x_hi - x_lo) * pw;
        svg << "<line x1=\"" << fmt2(px) << "\" y1=\"" << fmt2(mt + ph) << "\" x2=\""
            << fmt2(px) << "\" y2=\"" << fmt2(mt + ph + 4) << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << fmt2(px) << "\" y=\"" << fmt2(mt + ph + 16)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << (log_x ? "1e" + fmt(t) : fmt(t)) << "</text>\n";
    }
    for (const double t : ticks(y_lo, y_hi)) {
        const double py = sy(t);
        svg << "<line x1=\"" << fmt2(ml - 4) << "\" y1=\"" << fmt2(py) << "\" x2=\""
            << fmt2(ml) << "\" y2=\"" << fmt2(py) << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << fmt2(ml - 7) << "\" y=\"" << fmt2(py + 3)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(t)
            << "</text>\n";
    }
    if (!x_label.empty()) {
        svg << "<text x=\"" << fmt2(ml + pw / 2) << "\" y=\"" << fmt2(mt + ph + 34)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape(x_label) << "</text>\n";
    }
    if (!y_label.empty()) {
        svg << "<text x=\"14\" y=\"" << fmt2(mt + ph / 2)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
               "transform=\"rotate(-90 14 "
            << fmt2(mt + ph / 2) << ")\">" << escape(y_label) << "</text>\n";
    }

    for (const PlotSeries& s : series) {
        if (s.x.size() != s.y.size()) {
            throw NumericError("LinePlot: series '" + s.label + "' x/y size mismatch");
        }
        if (s.points_only) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                svg << "<circle cx=\"" << fmt2(sx(s.x[i])) << "\" cy=\"" << fmt2(sy(s.y[i]))
                    << "\" r=\"1.6\" fill=\"" << s.color << "\"/>\n";
            }
        } else if (!s.x.empty()) {
            svg << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.2\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (i) {
                    svg << ' ';
                }
                svg << fmt2(sx(s.x[i])) << ',' << fmt2(sy(s.y[i]));
            }
            svg << "\"/>\n";
        }
    }

    // legend
    double ly = mt + 12;
    for (const PlotSeries& s : series) {
        if (s.label.empty()) {
            continue;
        }
        svg << "<line x1=\"" << fmt2(ml + pw - 120) << "\" y1=\"" << fmt2(ly) << "\" x2=\""
            << fmt2(ml + pw - 100) << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fmt2(ml + pw - 95) << "\" y=\"" << fmt2(ly + 3)
            << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(s.label)
            << "</text>\n";
        ly += 14;
    }

    svg << "</svg>\n";
    return svg.str();
}

void LinePlot::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << render();
}

} // namespace ecrank
