#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace eeo {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_err;  // optional; CI whiskers when non-empty
};

/// Minimal standalone SVG line plot (axes, ticks, legend, error whiskers).
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

} // namespace eeo
