#pragma once

#include <cstdint>
#include <queue>
#include <set>
#include <unordered_map>
#include <vector>

#include "etlsched/workload.hpp"

namespace etlsched {

struct NodeSpec {
    int id = 0;
    double speed = 1.0;        // compute-units per sim-second
    double bandwidth = 1.0;    // MB per sim-second
    double mem_capacity = 1.0; // MB
    int slots = 1;
    double cost_rate = 0.0;    // cost-units per compute-unit
};

struct ClusterSpec {
    std::vector<NodeSpec> nodes;
    double coord_base = 0.05;     // sim-seconds per assignment
    double coord_per_node = 0.15; // sim-seconds per assignment per node in the cluster

    int size() const { return static_cast<int>(nodes.size()); }
};

// The reproducible heterogeneity profile "default-hetero-v1": speeds uniform
// in [1,4], bandwidth in [5,20], slots in {1,2,4}, memory in [256,1024] MB,
// cost rate in [0.5,2.0], all drawn deterministically from the seed.
ClusterSpec default_hetero_profile(int n_nodes, std::uint64_t seed, double coord_base = 0.05,
                                   double coord_per_node = 0.15);

void validate(const ClusterSpec& spec); // throws ConfigError

nlohmann::ordered_json cluster_spec_to_json(const ClusterSpec& spec);
ClusterSpec cluster_spec_from_json(const nlohmann::json& j);

enum class EventKind : int { TaskRelease = 0, TaskFinish = 1, TransferFinish = 2 };

struct SimEvent {
    double time = 0.0;
    std::uint64_t seq = 0; // breaks time ties deterministically
    EventKind kind = EventKind::TaskRelease;
    int task_id = -1;
    int node_id = -1;
};

const char* event_kind_name(EventKind k);

enum class TaskStatus : int {
    Pending = 0,      // not yet released / parents incomplete
    Ready = 1,        // schedulable now
    Transferring = 2, // assigned, waiting on cross-node parent data
    Running = 3,      // assigned, computing
    Completed = 4,    // finished on time (delta = 1)
    MissedDeadline = 5, // finished execution after its deadline (delta = 0)
    Unfinished = 6    // episode horizon hit before completion
};

inline bool is_terminal(TaskStatus s) {
    return s == TaskStatus::Completed || s == TaskStatus::MissedDeadline ||
           s == TaskStatus::Unfinished;
}

// finalized-task result: (delta_i, t_i, c_i)
struct TaskOutcome {
    int task_id = -1;
    bool success = false;  // delta_i
    double latency = 0.0;  // t_i = finish - release
    double cost = 0.0;     // c_i = work * cost_rate of the executing node
};

struct NodeState {
    int busy_slots = 0;   // transferring + computing
    int computing = 0;
    int transferring = 0; // the per-node data wait queue
    double mem_used = 0.0;
    double io_demand = 0.0; // aggregate MB/s demand of resident tasks
};

// Additive execution-time model: compute + input I/O + cross-node parent
// transfers + coordination overhead that grows linearly with cluster size.
double estimate_exec_time(const Task& task, const NodeSpec& node, const TaskDag& dag,
                          const std::unordered_map<int, int>& parent_locations,
                          const ClusterSpec& cluster);

// Discrete-event executor for one episode. Strictly sequential; determinism
// contract: identical (dag, spec, assignment sequence) gives an identical
// event trace and final state.
class ClusterSim {
public:
    ClusterSim(const TaskDag& dag, const ClusterSpec& spec);

    double sim_time() const { return sim_time_; }
    int n_nodes() const { return spec_.size(); }
    const ClusterSpec& spec() const { return spec_; }
    const TaskDag& dag() const { return *dag_; }

    double estimate_exec_time_on(int task_id, int node_id) const;
    bool can_assign(int task_id, int node_id) const;

    // occupies a slot, accrues cost, schedules transfer/finish events;
    // throws AssignmentRejected when preconditions fail
    void assign(int task_id, int node_id);

    struct AdvanceResult {
        std::vector<SimEvent> fired;
        std::vector<TaskOutcome> finalized;
    };
    // fires the single next event in (time, seq) order; throws on deadlock
    AdvanceResult advance_next_event();

    bool has_pending_events() const { return !events_.empty(); }
    double next_event_time() const;

    // marks every non-terminal task Unfinished and pins sim_time to the horizon
    std::vector<int> finalize_at_horizon(double horizon);

    // queries
    const std::set<std::pair<double, int>>& ready_set() const { return ready_; } // (release, id)
    bool any_free_slot() const;
    int unfinished_count() const { return unfinished_; }
    bool all_terminal() const { return unfinished_ == 0; }
    TaskStatus status(int task_id) const { return status_[task_id]; }
    const NodeState& node_state(int node_id) const { return node_states_[node_id]; }
    const NodeSpec& node_spec(int node_id) const { return spec_.nodes[node_id]; }
    double start_time(int task_id) const { return start_[task_id]; }   // -1 if never assigned
    double finish_time(int task_id) const { return finish_[task_id]; } // -1 if not finished
    int node_of(int task_id) const;                                    // -1 if unknown
    double cost_of(int task_id) const { return cost_[task_id]; }
    const std::vector<SimEvent>& event_log() const { return event_log_; }

private:
    void push_event(double time, EventKind kind, int task_id, int node_id);
    void make_ready(int task_id);
    TaskOutcome finalize_task(int task_id);
    double transfer_mb(int task_id, int node_id) const;

    const TaskDag* dag_;
    ClusterSpec spec_;

    struct EventOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            return a.time > b.time || (a.time == b.time && a.seq > b.seq);
        }
    };
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> events_;
    std::uint64_t next_seq_ = 0;

    double sim_time_ = 0.0;
    std::vector<TaskStatus> status_;
    std::vector<int> remaining_parents_;
    std::vector<int> task_node_;
    std::vector<double> start_;
    std::vector<double> finish_;
    std::vector<double> cost_;
    std::vector<double> total_duration_;
    std::set<std::pair<double, int>> ready_;
    std::vector<NodeState> node_states_;
    std::unordered_map<int, int> completed_location_; // task -> node, for transfer estimates
    std::vector<SimEvent> event_log_;
    int unfinished_ = 0;
};

} // namespace etlsched
