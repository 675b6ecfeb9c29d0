#pragma once

#include <string>
#include <vector>

namespace ecrank {

/// Minimal deterministic SVG line plots: output is a pure function of the
/// data (fixed formatting, no timestamps), so identical inputs give
/// byte-identical files.
struct PlotSeries {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    bool points_only = false;
};

struct LinePlot {
    int width = 640;
    int height = 420;
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<PlotSeries> series;

    std::string render() const;
    void write(const std::string& path) const;
};

/// Fixed palette indexed by predicted class.
const std::string& class_color(int v);

} // namespace ecrank
