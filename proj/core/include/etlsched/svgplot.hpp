#pragma once

#include <string>
#include <vector>

namespace etlsched {

// one sweep series loaded back from the long-form CSV
struct SweepSeries {
    std::string param_name;  // x axis label, from the param column
    std::string metric_name; // y axis label, from the metric column header

    struct Point {
        double value = 0.0;
        std::vector<double> samples; // successful cells only
    };
    std::vector<Point> points; // grid order (first appearance)
};

// parses "param,value,seed,<metric>[,status]"; throws ConfigError naming the
// missing column or when no data rows survive
SweepSeries read_sweep_csv(const std::string& csv_text);
SweepSeries read_sweep_csv_file(const std::string& path);

// single line chart: mean polyline plus a +-sd band; byte-deterministic for
// identical input
std::string render_line_chart_svg(const SweepSeries& series);

} // namespace etlsched
