#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace etlsched {

// The five ETL pipeline stages. Every task belongs to exactly one stage and
// edges only run from a lower stage to a strictly higher one.
enum class Stage : int { Extract = 0, Clean = 1, Transform = 2, Aggregate = 3, Load = 4 };
inline constexpr int kNumStages = 5;

enum class SourceKind : int { StructuredRelational = 0, SemiStructuredStream = 1 };

// Descriptor for one class of data source: how fast new extract tasks arrive
// and the baseline latency of pulling from it.
struct SourceClass {
    SourceKind kind = SourceKind::StructuredRelational;
    double arrival_rate = 0.0; // tasks per sim-second
    double base_latency = 0.0; // sim-seconds
};

struct Task {
    int id = 0;
    Stage stage = Stage::Extract;
    double work = 1.0;     // compute-units
    double input_mb = 0.0; // megabytes read by the task
    SourceKind source = SourceKind::StructuredRelational;
    double release = 0.0;  // earliest-start anchor, sim-seconds
    double deadline = 1.0; // sim-seconds, > release
    int priority = 0;      // [0,4]; carried in features, not used by the simulator
};

struct Edge {
    int producer = 0;
    int consumer = 0;
};

struct TaskDag {
    std::vector<Task> tasks;
    std::vector<Edge> edges;
    double scale_factor = 1.0;

    const std::vector<int>& parents(int task_id) const { return parents_[task_id]; }
    const std::vector<int>& children(int task_id) const { return children_[task_id]; }
    int size() const { return static_cast<int>(tasks.size()); }

    // rebuild adjacency; validates endpoints and stage monotonicity
    void build_index();

private:
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
};

struct WorkloadConfig {
    int n_tasks = 200;
    std::array<int, 5> layer_widths{40, 40, 40, 40, 40};
    double edge_prob = 0.05;
    double scale_factor = 0.5;
    double deadline_slack = 3.0; // must be > 1
    double stream_fraction = 0.4;
    std::uint64_t seed = 42;

    // the two source classes feeding extract tasks
    SourceClass structured{SourceKind::StructuredRelational, 0.1, 0.3};
    SourceClass stream{SourceKind::SemiStructuredStream, 0.4, 0.05};

    // reference rates used for release/deadline anchors; the environment
    // overwrites these with the actual cluster means at reset
    double ref_speed = 2.5;      // compute-units per sim-second
    double ref_bandwidth = 12.5; // MB per sim-second

    // queueing headroom folded into downstream release anchors: a child is
    // expected ready only after its parents' isolated times scaled by this
    double pipeline_allowance = 2.0;
};

// isolated execution estimate at the config's reference rates
inline double isolated_exec_estimate(const Task& t, const WorkloadConfig& cfg) {
    return t.work / cfg.ref_speed + t.input_mb / cfg.ref_bandwidth;
}

void validate(const WorkloadConfig& cfg); // throws ConfigError

// Deterministic layered DAG generator. Same config (including seed) always
// yields a byte-identical DAG.
TaskDag generate_dag(const WorkloadConfig& cfg);

// Kahn's algorithm, ready set ordered by ascending id. Throws WorkloadError on a cycle.
std::vector<int> topological_order(const TaskDag& dag);

// longest path (in edges) from any root, per task
std::vector<int> dag_depths(const TaskDag& dag);

// stable-field-order serialization ("taskdag-v1")
nlohmann::ordered_json dag_to_json(const TaskDag& dag, const WorkloadConfig& cfg);
TaskDag dag_from_json(const nlohmann::json& j);

nlohmann::ordered_json workload_config_to_json(const WorkloadConfig& cfg);
WorkloadConfig workload_config_from_json(const nlohmann::json& j);

std::string stage_name(Stage s);
Stage stage_from_name(const std::string& name);

} // namespace etlsched
