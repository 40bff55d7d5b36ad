#include "eeo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 46, kBottom = 54;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
    double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
    for (const PlotSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            const double err = i < s.y_err.size() ? s.y_err[i] : 0.0;
            ymin = std::min(ymin, s.y[i] - err);
            ymax = std::max(ymax, s.y[i] + err);
        }
    }
    if (!(xmin <= xmax) || !(ymin <= ymax)) {
        throw ValueError("write_line_plot_svg: no data points");
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
        << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='15' "
        << "font-family='sans-serif'>" << title << "</text>\n";

    // Axes.
    svg << "<line x1='" << kLeft << "' y1='" << kTop + ph << "' x2='" << kLeft + pw << "' y2='"
        << kTop + ph << "' stroke='black'/>\n"
        << "<line x1='" << kLeft << "' y1='" << kTop << "' x2='" << kLeft << "' y2='" << kTop + ph
        << "' stroke='black'/>\n";

    for (int t = 0; t <= 5; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 5.0;
        const double yv = ymin + (ymax - ymin) * t / 5.0;
        svg << "<line x1='" << px(xv) << "' y1='" << kTop + ph << "' x2='" << px(xv) << "' y2='"
            << kTop + ph + 5 << "' stroke='black'/>\n"
            << "<text x='" << px(xv) << "' y='" << kTop + ph + 18
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << fmt(xv)
            << "</text>\n"
            << "<line x1='" << kLeft - 5 << "' y1='" << py(yv) << "' x2='" << kLeft << "' y2='"
            << py(yv) << "' stroke='black'/>\n"
            << "<text x='" << kLeft - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << fmt(yv)
            << "</text>\n";
    }
    svg << "<text x='" << kLeft + pw / 2 << "' y='" << kHeight - 12
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label
        << "</text>\n"
        << "<text x='16' y='" << kTop + ph / 2
        << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 16 "
        << kTop + ph / 2 << ")'>" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = kColors[si % 6];
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) pts << ' ';
            pts << px(s.x[i]) << ',' << py(s.y[i]);
        }
        svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
            << "' stroke-width='2'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            svg << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='3' fill='"
                << color << "'/>\n";
            if (i < s.y_err.size() && s.y_err[i] > 0.0) {
                svg << "<line x1='" << px(s.x[i]) << "' y1='" << py(s.y[i] - s.y_err[i]) << "' x2='"
                    << px(s.x[i]) << "' y2='" << py(s.y[i] + s.y_err[i]) << "' stroke='" << color
                    << "' stroke-width='1'/>\n";
            }
        }
        const double ly = kTop + 16 + 18 * static_cast<double>(si);
        svg << "<line x1='" << kLeft + pw + 12 << "' y1='" << ly << "' x2='" << kLeft + pw + 34
            << "' y2='" << ly << "' stroke='" << color << "' stroke-width='2'/>\n"
            << "<text x='" << kLeft + pw + 40 << "' y='" << ly + 4
            << "' font-size='11' font-family='sans-serif'>" << s.name << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plot file " + path.string());
    out << svg.str();
}

} // namespace eeo
