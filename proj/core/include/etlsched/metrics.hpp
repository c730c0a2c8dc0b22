#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace etlsched {

// one row per task at the end of an episode
struct TaskRecord {
    int task_id = -1;
    double release = 0.0;
    double start = -1.0;  // -1 when never assigned
    double finish = -1.0; // -1 when unfinished at the horizon
    bool success = false; // delta_i
    double latency = 0.0; // t_i, only meaningful when finished
    double cost = 0.0;    // c_i
    int node = -1;
    int status = 0; // TaskStatus as int
};

struct EpisodeTrace {
    int n_tasks = 0;
    std::vector<TaskRecord> tasks;
    std::vector<double> rewards; // per decision step
    double horizon = 0.0;
    double makespan = 0.0; // sim-time at episode end
    double t_max = 1.0;
    double c_max = 1.0;
    double wall_seconds = 0.0; // informational only; never serialized into artifacts
};

struct MetricsReport {
    double asd = 0.0;            // average scheduling delay, sim-seconds
    double tcr = 0.0;            // task completion rate, percent
    double tp = 0.0;             // throughput, completed tasks per 100 sim-seconds
    double rc = 0.0;             // normalized resource cost, [0,1]
    double avg_cum_reward = 0.0; // mean discounted return per episode
    int episodes = 0;
    std::vector<std::uint64_t> seeds;
    double mean_makespan = 0.0;
    long completed_total = 0;
    std::uint64_t config_fingerprint = 0; // compare_reports warns on mismatch
};

// Aggregates episode traces into the four headline metrics plus the mean
// discounted return. All values are across-episode means of per-episode values.
MetricsReport compute_metrics(const std::vector<EpisodeTrace>& traces, double gamma);

struct ComparisonRow {
    std::string name;
    MetricsReport report;
    // rank per metric (1 = best in the metric's preferred direction)
    int rank_asd = 0, rank_tcr = 0, rank_tp = 0, rank_rc = 0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows; // sorted by ASD rank, ties by name
    std::vector<std::string> warnings;

    std::string to_text() const; // arrows match the reporting convention: ASD/RC down, TCR/TP up
    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
};

ComparisonTable compare_reports(const std::map<std::string, MetricsReport>& reports);

nlohmann::ordered_json metrics_report_to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

// fixed-format float used in all CSV/SVG artifacts for byte determinism
std::string fmt_double(double v);

} // namespace etlsched
