#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etlsched/agent.hpp"
#include "etlsched/env.hpp"
#include "etlsched/metrics.hpp"

namespace etlsched {

enum class AgentKind { Dqn, Ddqn, QTable, Random, RoundRobin, LeastLoaded };

AgentKind agent_kind_from_name(const std::string& name); // throws ConfigError listing valid names
std::string agent_kind_name(AgentKind kind);
bool is_learning(AgentKind kind);
std::vector<AgentKind> parse_agent_list(const std::string& comma_separated);

// "runcfg-v1": one experiment definition (workload + cluster + env + agent +
// episode counts + seeds)
struct RunConfig {
    WorkloadConfig workload;

    std::string cluster_profile = "default-hetero-v1";
    int n_nodes = 8;
    double coord_base = 0.05;
    double coord_per_node = 0.15;
    std::optional<ClusterSpec> explicit_cluster; // overrides the profile when set

    EnvConfig env;
    AgentConfig agent;
    int episodes = 300;      // training episodes per seed
    int eval_episodes = 20;  // greedy evaluation episodes per seed (metrics source)
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string output_dir;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

// parses the file and applies "dotted.path=value" overrides; parse errors
// carry file:line positions
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
void apply_override(nlohmann::ordered_json& j, const std::string& dotted_assignment);

ClusterSpec build_cluster(const RunConfig& cfg, std::uint64_t run_seed);

// hash over everything that must match for reports to be comparable
// (workload, cluster, env, episode counts, seeds; not the agent)
std::uint64_t config_fingerprint(const RunConfig& cfg);

struct EpisodePoint {
    std::uint64_t seed = 0;
    int episode = 0;
    bool eval = false;
    int steps = 0;
    double reward_sum = 0.0;
    double discounted_return = 0.0;
};

struct RunResult {
    MetricsReport report; // over eval episodes only
    std::vector<EpisodePoint> curve;
    std::vector<EpisodeTrace> eval_traces;
    std::vector<std::vector<SimEvent>> eval_event_logs;
    std::optional<nlohmann::ordered_json> checkpoint; // learning agents only
};

// one full (train +) eval run for one seed; fully deterministic in (cfg, kind, seed)
RunResult run_agent(const RunConfig& cfg, AgentKind kind, std::uint64_t seed);

struct BenchResult {
    std::map<std::string, MetricsReport> aggregate;             // pooled eval episodes
    std::map<std::string, std::vector<MetricsReport>> per_seed; // seed order matches cfg.seeds
    ComparisonTable table;
};

BenchResult run_bench(const RunConfig& cfg, const std::vector<AgentKind>& agents, int jobs);

struct SweepSpec {
    enum class Param { LearningRate, Gamma, NodeCount };
    Param param = Param::LearningRate;
    std::vector<double> grid;
    RunConfig base;
    AgentKind agent = AgentKind::Dqn;
};

SweepSpec::Param sweep_param_from_name(const std::string& name);
std::string sweep_param_name(SweepSpec::Param p);
std::string sweep_metric_name(SweepSpec::Param p); // avg_cum_reward or asd
void validate(const SweepSpec& spec);              // grid domain checks

struct SweepCell {
    double value = 0.0;
    std::uint64_t seed = 0;
    double metric = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepResult {
    std::string param_name;
    std::string metric_name;
    std::vector<SweepCell> cells; // (grid index, seed index) order

    struct SummaryRow {
        double value = 0.0;
        double mean = 0.0;
        double sd = 0.0;
        int n = 0;
    };
    std::vector<SummaryRow> summary() const;
    std::string to_long_csv() const;    // param,value,seed,<metric>,status
    std::string to_summary_csv() const; // param,value,mean,sd,n
};

// runs |grid| x |seeds| cells, up to `jobs` in parallel; cell order in the
// result is deterministic regardless of scheduling
SweepResult run_sweep(const SweepSpec& spec, int jobs);

// artifact helpers
std::string curve_to_csv(const std::vector<EpisodePoint>& curve);
std::string event_log_to_jsonl(const std::vector<std::vector<SimEvent>>& episodes);
void write_text_file(const std::string& path, const std::string& content);
void ensure_output_dir(const std::string& dir); // creates; throws ConfigError when unusable

} // namespace etlsched
