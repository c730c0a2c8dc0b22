#include "etlsched/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "etlsched/errors.hpp"

namespace etlsched {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace

SweepSeries read_sweep_csv(const std::string& csv_text) {
    std::stringstream ss(csv_text);
    std::string line;
    if (!std::getline(ss, line)) throw ConfigError("sweep CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_csv_line(line);
    const char* required[3] = {"param", "value", "seed"};
    for (int i = 0; i < 3; ++i) {
        if (static_cast<int>(header.size()) <= i || header[i] != required[i])
            throw ConfigError(std::string("sweep CSV is missing column: ") + required[i]);
    }
    if (header.size() < 4) throw ConfigError("sweep CSV is missing column: metric");

    SweepSeries series;
    series.metric_name = header[3];
    const bool has_status = header.size() >= 5 && header[4] == "status";

    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cols = split_csv_line(line);
        if (cols.size() < 4) throw ConfigError("sweep CSV row has too few columns: " + line);
        if (series.param_name.empty()) series.param_name = cols[0];
        if (has_status && cols.size() >= 5 && cols[4] != "ok") continue;

        const double value = std::strtod(cols[1].c_str(), nullptr);
        const double metric = std::strtod(cols[3].c_str(), nullptr);
        if (std::isnan(metric)) continue;

        auto it = std::find_if(series.points.begin(), series.points.end(),
                               [&](const SweepSeries::Point& p) { return p.value == value; });
        if (it == series.points.end()) {
            series.points.push_back({value, {metric}});
        } else {
            it->samples.push_back(metric);
        }
    }
    if (series.points.empty()) throw ConfigError("sweep CSV has no usable data rows");
    return series;
}

SweepSeries read_sweep_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open CSV: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return read_sweep_csv(buf.str());
}

std::string render_line_chart_svg(const SweepSeries& series) {
    constexpr double W = 720.0, H = 440.0;
    constexpr double ML = 80.0, MR = 30.0, MT = 30.0, MB = 70.0;
    const double plot_w = W - ML - MR;
    const double plot_h = H - MT - MB;
    const int n = static_cast<int>(series.points.size());

    std::vector<double> mean(n), sd(n);
    for (int i = 0; i < n; ++i) {
        const auto& s = series.points[i].samples;
        double m = 0.0;
        for (double v : s) m += v;
        m /= static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - m) * (v - m);
        mean[i] = m;
        sd[i] = s.size() > 1 ? std::sqrt(var / (s.size() - 1)) : 0.0;
    }

    double lo = mean[0] - sd[0], hi = mean[0] + sd[0];
    for (int i = 1; i < n; ++i) {
        lo = std::min(lo, mean[i] - sd[i]);
        hi = std::max(hi, mean[i] + sd[i]);
    }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    // grid points are laid out at equal spacing; tick labels carry the values
    auto x_at = [&](int i) {
        return n == 1 ? ML + plot_w / 2.0
                      : ML + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto y_at = [&](double v) { return MT + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

    // +-sd band: forward along the upper edge, back along the lower
    if (n > 1) {
        svg << "<path d=\"M";
        for (int i = 0; i < n; ++i)
            svg << (i ? " L" : "") << num(x_at(i)) << "," << num(y_at(mean[i] + sd[i]));
        for (int i = n - 1; i >= 0; --i)
            svg << " L" << num(x_at(i)) << "," << num(y_at(mean[i] - sd[i]));
        svg << " Z\" fill=\"#4878cf\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }

    svg << "<polyline fill=\"none\" stroke=\"#23456b\" stroke-width=\"2\" points=\"";
    for (int i = 0; i < n; ++i) {
        if (i) svg << " ";
        svg << num(x_at(i)) << "," << num(y_at(mean[i]));
    }
    svg << "\"/>\n";
    for (int i = 0; i < n; ++i)
        svg << "<circle cx=\"" << num(x_at(i)) << "\" cy=\"" << num(y_at(mean[i]))
            << "\" r=\"3\" fill=\"#23456b\"/>\n";

    // axes
    svg << "<line x1=\"" << num(ML) << "\" y1=\"" << num(MT + plot_h) << "\" x2=\"" << num(ML + plot_w)
        << "\" y2=\"" << num(MT + plot_h) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << num(ML) << "\" y1=\"" << num(MT) << "\" x2=\"" << num(ML) << "\" y2=\""
        << num(MT + plot_h) << "\" stroke=\"black\"/>\n";

    for (int i = 0; i < n; ++i) {
        svg << "<line x1=\"" << num(x_at(i)) << "\" y1=\"" << num(MT + plot_h) << "\" x2=\""
            << num(x_at(i)) << "\" y2=\"" << num(MT + plot_h + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(x_at(i)) << "\" y=\"" << num(MT + plot_h + 20)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(series.points[i].value)
            << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        svg << "<line x1=\"" << num(ML - 5) << "\" y1=\"" << num(y_at(v)) << "\" x2=\"" << num(ML)
            << "\" y2=\"" << num(y_at(v)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(ML - 9) << "\" y=\"" << num(y_at(v) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
    }

    svg << "<text x=\"" << num(ML + plot_w / 2.0) << "\" y=\"" << num(H - 18)
        << "\" font-size=\"13\" text-anchor=\"middle\">" << series.param_name << "</text>\n";
    svg << "<text x=\"18\" y=\"" << num(MT + plot_h / 2.0)
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(MT + plot_h / 2.0) << ")\">" << series.metric_name << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace etlsched
