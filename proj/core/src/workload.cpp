#include "etlsched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "etlsched/errors.hpp"
#include "etlsched/rng.hpp"

namespace etlsched {

void TaskDag::build_index() {
    const int n = size();
    parents_.assign(n, {});
    children_.assign(n, {});
    for (const Edge& e : edges) {
        if (e.producer < 0 || e.producer >= n || e.consumer < 0 || e.consumer >= n)
            throw WorkloadError("edge endpoint out of range");
        if (tasks[e.producer].stage >= tasks[e.consumer].stage)
            throw WorkloadError("edge does not go to a strictly higher stage");
        children_[e.producer].push_back(e.consumer);
        parents_[e.consumer].push_back(e.producer);
    }
    for (auto& v : parents_) std::sort(v.begin(), v.end());
    for (auto& v : children_) std::sort(v.begin(), v.end());
}

void validate(const WorkloadConfig& cfg) {
    if (cfg.n_tasks < kNumStages)
        throw ConfigError("n_tasks must be at least 5 (one task per stage)");
    for (int w : cfg.layer_widths)
        if (w <= 0) throw ConfigError("layer_widths must all be positive");
    if (cfg.edge_prob < 0.0 || cfg.edge_prob > 1.0)
        throw ConfigError("edge_prob must be in [0,1]");
    if (!(cfg.scale_factor > 0.0)) throw ConfigError("scale_factor must be positive");
    if (!(cfg.deadline_slack > 1.0)) throw ConfigError("deadline_slack must be > 1");
    if (cfg.stream_fraction < 0.0 || cfg.stream_fraction > 1.0)
        throw ConfigError("stream_fraction must be in [0,1]");
    for (const SourceClass* sc : {&cfg.structured, &cfg.stream}) {
        if (!std::isfinite(sc->arrival_rate) || sc->arrival_rate < 0.0)
            throw ConfigError("source arrival_rate must be finite and >= 0");
        if (sc->base_latency < 0.0) throw ConfigError("source base_latency must be >= 0");
    }
    if (!(cfg.ref_speed > 0.0) || !(cfg.ref_bandwidth > 0.0))
        throw ConfigError("reference speed/bandwidth must be positive");
    if (!(cfg.pipeline_allowance >= 1.0))
        throw ConfigError("pipeline_allowance must be >= 1");
}

// Apportion n_tasks over the five stages proportionally to layer_widths,
// keeping every stage non-empty. When the widths already sum to n_tasks the
// result is exactly layer_widths.
static std::array<int, 5> apportion_layers(const WorkloadConfig& cfg) {
    const double total_w = std::accumulate(cfg.layer_widths.begin(), cfg.layer_widths.end(), 0.0);
    std::array<int, 5> sizes{};
    std::array<double, 5> frac{};
    int assigned = 0;
    for (int k = 0; k < 5; ++k) {
        double exact = cfg.n_tasks * cfg.layer_widths[k] / total_w;
        sizes[k] = std::max(1, static_cast<int>(std::floor(exact)));
        frac[k] = exact - std::floor(exact);
        assigned += sizes[k];
    }
    // distribute leftovers by largest fractional part, ties to the lower stage
    while (assigned < cfg.n_tasks) {
        int best = 0;
        for (int k = 1; k < 5; ++k)
            if (frac[k] > frac[best]) best = k;
        sizes[best] += 1;
        frac[best] = -1.0;
        ++assigned;
    }
    // floor+max(1,...) can overshoot; shrink the largest layers back down
    while (assigned > cfg.n_tasks) {
        int best = -1;
        for (int k = 0; k < 5; ++k)
            if (sizes[k] > 1 && (best < 0 || sizes[k] > sizes[best])) best = k;
        if (best < 0) throw ConfigError("n_tasks too small for five non-empty stages");
        sizes[best] -= 1;
        --assigned;
    }
    return sizes;
}

TaskDag generate_dag(const WorkloadConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);

    const std::array<int, 5> layer_sizes = apportion_layers(cfg);

    TaskDag dag;
    dag.scale_factor = cfg.scale_factor;
    dag.tasks.reserve(cfg.n_tasks);

    std::array<std::vector<int>, 5> layers;
    int next_id = 0;
    for (int k = 0; k < 5; ++k) {
        for (int i = 0; i < layer_sizes[k]; ++i) {
            Task t;
            t.id = next_id++;
            t.stage = static_cast<Stage>(k);
            t.work = rng.log_uniform(1.0, 50.0) * cfg.scale_factor;
            t.input_mb = rng.log_uniform(1.0, 100.0);
            t.priority = rng.uniform_int(5);
            t.source = SourceKind::StructuredRelational;
            layers[k].push_back(t.id);
            dag.tasks.push_back(t);
        }
    }

    // extract tasks split between the two source classes
    for (int id : layers[0]) {
        dag.tasks[id].source = rng.uniform() < cfg.stream_fraction
                                   ? SourceKind::SemiStructuredStream
                                   : SourceKind::StructuredRelational;
    }

    // releases: the first half of the extract layer lands as a batch at t=0,
    // the rest follow a Poisson arrival process per source class
    const int n_extract = layer_sizes[0];
    const int batch = (n_extract + 1) / 2;
    double clock_structured = 0.0;
    double clock_stream = 0.0;
    for (int i = 0; i < n_extract; ++i) {
        Task& t = dag.tasks[layers[0][i]];
        if (i < batch) {
            t.release = 0.0;
            continue;
        }
        const SourceClass& sc =
            t.source == SourceKind::SemiStructuredStream ? cfg.stream : cfg.structured;
        double& clock = t.source == SourceKind::SemiStructuredStream ? clock_stream : clock_structured;
        if (sc.arrival_rate > 0.0)
            clock += rng.exponential(sc.arrival_rate);
        t.release = clock + sc.base_latency;
    }

    // edges between adjacent stages; every non-extract task gets at least one parent
    for (int k = 1; k < 5; ++k) {
        for (int consumer : layers[k]) {
            bool has_parent = false;
            for (int producer : layers[k - 1]) {
                if (rng.uniform() < cfg.edge_prob) {
                    dag.edges.push_back({producer, consumer});
                    has_parent = true;
                }
            }
            if (!has_parent) {
                int producer = layers[k - 1][rng.uniform_int(layer_sizes[k - 1])];
                dag.edges.push_back({producer, consumer});
            }
        }
    }
    dag.build_index();

    // downstream release anchors follow the critical-path estimate at the
    // reference rates, padded by the pipeline allowance so anchors stay
    // meaningful under stage contention; deadlines add the slack on top
    for (int k = 1; k < 5; ++k) {
        for (int id : layers[k]) {
            double anchor = 0.0;
            for (int p : dag.parents(id)) {
                const Task& pt = dag.tasks[p];
                anchor = std::max(anchor,
                                  pt.release + cfg.pipeline_allowance * isolated_exec_estimate(pt, cfg));
            }
            dag.tasks[id].release = anchor;
        }
    }
    for (Task& t : dag.tasks)
        t.deadline = t.release + cfg.deadline_slack * isolated_exec_estimate(t, cfg);

    return dag;
}

std::vector<int> topological_order(const TaskDag& dag) {
    const int n = dag.size();
    std::vector<int> indegree(n, 0);
    for (const Edge& e : dag.edges) indegree[e.consumer]++;

    std::set<int> ready;
    for (int i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.insert(i);

    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
        int id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (int c : dag.children(id))
            if (--indegree[c] == 0) ready.insert(c);
    }
    if (static_cast<int>(order.size()) != n)
        throw WorkloadError("workload graph contains a cycle");
    return order;
}

std::vector<int> dag_depths(const TaskDag& dag) {
    std::vector<int> depth(dag.size(), 0);
    for (int id : topological_order(dag))
        for (int p : dag.parents(id)) depth[id] = std::max(depth[id], depth[p] + 1);
    return depth;
}

std::string stage_name(Stage s) {
    switch (s) {
    case Stage::Extract: return "extract";
    case Stage::Clean: return "clean";
    case Stage::Transform: return "transform";
    case Stage::Aggregate: return "aggregate";
    case Stage::Load: return "load";
    }
    return "?";
}

Stage stage_from_name(const std::string& name) {
    for (int k = 0; k < kNumStages; ++k)
        if (stage_name(static_cast<Stage>(k)) == name) return static_cast<Stage>(k);
    throw ConfigError("unknown stage name: " + name);
}

static std::string source_name(SourceKind k) {
    return k == SourceKind::SemiStructuredStream ? "stream" : "structured";
}

static SourceKind source_from_name(const std::string& name) {
    if (name == "stream") return SourceKind::SemiStructuredStream;
    if (name == "structured") return SourceKind::StructuredRelational;
    throw ConfigError("unknown source kind: " + name);
}

nlohmann::ordered_json workload_config_to_json(const WorkloadConfig& cfg) {
    nlohmann::ordered_json j;
    j["n_tasks"] = cfg.n_tasks;
    j["layer_widths"] = cfg.layer_widths;
    j["edge_prob"] = cfg.edge_prob;
    j["scale_factor"] = cfg.scale_factor;
    j["deadline_slack"] = cfg.deadline_slack;
    j["stream_fraction"] = cfg.stream_fraction;
    j["seed"] = cfg.seed;
    j["structured"] = {{"arrival_rate", cfg.structured.arrival_rate},
                       {"base_latency", cfg.structured.base_latency}};
    j["stream"] = {{"arrival_rate", cfg.stream.arrival_rate},
                   {"base_latency", cfg.stream.base_latency}};
    j["ref_speed"] = cfg.ref_speed;
    j["ref_bandwidth"] = cfg.ref_bandwidth;
    j["pipeline_allowance"] = cfg.pipeline_allowance;
    return j;
}

WorkloadConfig workload_config_from_json(const nlohmann::json& j) {
    WorkloadConfig cfg;
    cfg.n_tasks = j.value("n_tasks", cfg.n_tasks);
    if (j.contains("layer_widths")) {
        auto w = j.at("layer_widths").get<std::vector<int>>();
        if (w.size() != 5) throw ConfigError("layer_widths must have exactly 5 entries");
        std::copy(w.begin(), w.end(), cfg.layer_widths.begin());
    }
    cfg.edge_prob = j.value("edge_prob", cfg.edge_prob);
    cfg.scale_factor = j.value("scale_factor", cfg.scale_factor);
    cfg.deadline_slack = j.value("deadline_slack", cfg.deadline_slack);
    cfg.stream_fraction = j.value("stream_fraction", cfg.stream_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("structured")) {
        cfg.structured.arrival_rate = j["structured"].value("arrival_rate", cfg.structured.arrival_rate);
        cfg.structured.base_latency = j["structured"].value("base_latency", cfg.structured.base_latency);
    }
    if (j.contains("stream")) {
        cfg.stream.arrival_rate = j["stream"].value("arrival_rate", cfg.stream.arrival_rate);
        cfg.stream.base_latency = j["stream"].value("base_latency", cfg.stream.base_latency);
    }
    cfg.ref_speed = j.value("ref_speed", cfg.ref_speed);
    cfg.ref_bandwidth = j.value("ref_bandwidth", cfg.ref_bandwidth);
    cfg.pipeline_allowance = j.value("pipeline_allowance", cfg.pipeline_allowance);
    return cfg;
}

nlohmann::ordered_json dag_to_json(const TaskDag& dag, const WorkloadConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema"] = "taskdag-v1";
    j["config"] = workload_config_to_json(cfg);
    j["tasks"] = nlohmann::ordered_json::array();
    for (const Task& t : dag.tasks) {
        nlohmann::ordered_json tj;
        tj["id"] = t.id;
        tj["stage"] = stage_name(t.stage);
        tj["work"] = t.work;
        tj["input_mb"] = t.input_mb;
        tj["source"] = source_name(t.source);
        tj["release"] = t.release;
        tj["deadline"] = t.deadline;
        tj["priority"] = t.priority;
        j["tasks"].push_back(std::move(tj));
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const Edge& e : dag.edges) j["edges"].push_back({e.producer, e.consumer});
    return j;
}

TaskDag dag_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "taskdag-v1") throw ConfigError("expected schema taskdag-v1");
    TaskDag dag;
    dag.scale_factor = j["config"].value("scale_factor", 1.0);
    for (const auto& tj : j.at("tasks")) {
        Task t;
        t.id = tj.at("id").get<int>();
        t.stage = stage_from_name(tj.at("stage").get<std::string>());
        t.work = tj.at("work").get<double>();
        t.input_mb = tj.at("input_mb").get<double>();
        t.source = source_from_name(tj.at("source").get<std::string>());
        t.release = tj.at("release").get<double>();
        t.deadline = tj.at("deadline").get<double>();
        t.priority = tj.at("priority").get<int>();
        dag.tasks.push_back(t);
    }
    for (const auto& ej : j.at("edges")) dag.edges.push_back({ej.at(0).get<int>(), ej.at(1).get<int>()});
    dag.build_index();
    return dag;
}

} // namespace etlsched
