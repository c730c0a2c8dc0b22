#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "etlsched/cluster.hpp"
#include "etlsched/metrics.hpp"
#include "etlsched/workload.hpp"

namespace etlsched {

// Weighted multi-objective reward: completion bonus minus normalized latency
// and normalized resource cost.
struct RewardWeights {
    double a1 = 1.0;
    double a2 = 0.5;
    double a3 = 0.5;
    double t_max = 0.0; // <= 0 means: derive from the workload at reset
    double c_max = 0.0; // <= 0 means: derive from the workload at reset
};

// r = a1*mean(delta) - a2*mean(min(t/t_max,1)) - a3*mean(min(c/c_max,1));
// 0 for an empty outcome list. Always within [-(a2+a3), a1].
double compute_reward(std::span<const TaskOutcome> outcomes, const RewardWeights& w);

struct EnvConfig {
    RewardWeights reward;
    double horizon = 0.0;            // <= 0 means horizon_multiplier * serial-makespan estimate
    double horizon_multiplier = 1.5;
    int defer_cap = 16;              // consecutive defers before a forced advance
    bool mask_invalid = false;       // true: invalid actions become silent defers (ablation)
};

struct StepInfo {
    std::vector<TaskOutcome> finalized; // tasks finalized during the transition
    bool invalid_action = false;
    bool defer_cap_hit = false;
};

struct StepResult {
    std::vector<double> state;
    double reward = 0.0;
    bool terminal = false;
    StepInfo info;
};

// Wraps the workload generator and cluster simulator as a discrete MDP.
//
// Observation layout (all components clamped to [0,1], dimension 12 + 4N):
//   x_t (8): candidate work/max, input/max, depth/max_depth, outdeg/max_outdeg,
//            priority/4, stream-source flag, ready_count/n_tasks, mean ready slack
//   x_r (4 per node): cpu_util, mem_used/capacity, bw_util, queue_len/slots
//   x_d (4): per source class: arrival_rate/max_rate, base_latency/max_latency
//
// Actions: 0..N-1 assign the candidate task to that node, N defers (advance
// one event). The candidate is the ready task with the earliest release
// anchor, ties broken by lowest id.
class SchedulingEnv {
public:
    SchedulingEnv(WorkloadConfig workload, ClusterSpec cluster, EnvConfig cfg);

    std::vector<double> reset(std::uint64_t seed);
    StepResult step(int action); // throws std::logic_error after terminal

    int n_nodes() const { return cluster_.size(); }
    int state_dim() const { return 12 + 4 * cluster_.size(); }
    int action_count() const { return cluster_.size() + 1; }
    int defer_action() const { return cluster_.size(); }

    // 0/1 per action; defer is always legal
    std::vector<char> legal_actions() const;
    int candidate_task() const; // -1 when no task is ready
    bool terminal() const { return terminal_; }
    double horizon() const { return horizon_; }
    const RewardWeights& effective_weights() const { return weights_; }
    const ClusterSim& sim() const { return *sim_; }
    const TaskDag& dag() const { return dag_; }
    const WorkloadConfig& workload_config() const { return workload_; }

    std::vector<double> observe() const;
    EpisodeTrace trace() const; // valid once terminal

private:
    struct AdvanceOutcome {
        std::vector<TaskOutcome> finalized;
    };
    void advance_one_event(AdvanceOutcome& out);
    void advance_to_decision_point(AdvanceOutcome& out);
    void jump_to_horizon();
    bool at_decision_point() const;

    WorkloadConfig workload_;
    ClusterSpec cluster_;
    EnvConfig cfg_;

    TaskDag dag_;
    std::optional<ClusterSim> sim_;
    RewardWeights weights_;
    double horizon_ = 0.0;
    bool terminal_ = true;
    int consecutive_defers_ = 0;
    std::vector<double> step_rewards_;
    std::vector<int> depths_;
    int max_depth_ = 1;
    int max_out_degree_ = 1;
    double max_work_ = 1.0;
    double max_input_ = 1.0;
};

} // namespace etlsched
