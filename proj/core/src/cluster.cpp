#include "etlsched/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "etlsched/errors.hpp"
#include "etlsched/rng.hpp"

namespace etlsched {

ClusterSpec default_hetero_profile(int n_nodes, std::uint64_t seed, double coord_base,
                                   double coord_per_node) {
    if (n_nodes < 1) throw ConfigError("cluster needs at least one node");
    Rng rng(mix64(seed ^ fnv1a64("default-hetero-v1")));
    ClusterSpec spec;
    spec.coord_base = coord_base;
    spec.coord_per_node = coord_per_node;
    static constexpr int kSlotChoices[3] = {1, 2, 4};
    for (int i = 0; i < n_nodes; ++i) {
        NodeSpec n;
        n.id = i;
        n.speed = rng.uniform(1.0, 4.0);
        n.bandwidth = rng.uniform(5.0, 20.0);
        n.slots = kSlotChoices[rng.uniform_int(3)];
        n.mem_capacity = rng.uniform(256.0, 1024.0);
        n.cost_rate = rng.uniform(0.5, 2.0);
        spec.nodes.push_back(n);
    }
    return spec;
}

void validate(const ClusterSpec& spec) {
    if (spec.nodes.empty()) throw ConfigError("cluster needs at least one node");
    for (int i = 0; i < spec.size(); ++i) {
        const NodeSpec& n = spec.nodes[i];
        if (n.id != i) throw ConfigError("node ids must be dense 0..N-1");
        if (!(n.speed > 0.0) || !(n.bandwidth > 0.0) || !(n.mem_capacity > 0.0))
            throw ConfigError("node speed/bandwidth/memory must be positive");
        if (n.slots < 1) throw ConfigError("node slots must be >= 1");
        if (n.cost_rate < 0.0) throw ConfigError("node cost_rate must be >= 0");
    }
    if (spec.coord_base < 0.0 || spec.coord_per_node < 0.0)
        throw ConfigError("coordination overhead terms must be >= 0");
}

nlohmann::ordered_json cluster_spec_to_json(const ClusterSpec& spec) {
    nlohmann::ordered_json j;
    j["coord_base"] = spec.coord_base;
    j["coord_per_node"] = spec.coord_per_node;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const NodeSpec& n : spec.nodes) {
        j["nodes"].push_back({{"id", n.id},
                              {"speed", n.speed},
                              {"bandwidth", n.bandwidth},
                              {"mem_capacity", n.mem_capacity},
                              {"slots", n.slots},
                              {"cost_rate", n.cost_rate}});
    }
    return j;
}

ClusterSpec cluster_spec_from_json(const nlohmann::json& j) {
    ClusterSpec spec;
    spec.coord_base = j.value("coord_base", spec.coord_base);
    spec.coord_per_node = j.value("coord_per_node", spec.coord_per_node);
    for (const auto& nj : j.at("nodes")) {
        NodeSpec n;
        n.id = nj.at("id").get<int>();
        n.speed = nj.at("speed").get<double>();
        n.bandwidth = nj.at("bandwidth").get<double>();
        n.mem_capacity = nj.at("mem_capacity").get<double>();
        n.slots = nj.at("slots").get<int>();
        n.cost_rate = nj.at("cost_rate").get<double>();
        spec.nodes.push_back(n);
    }
    validate(spec);
    return spec;
}

const char* event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::TaskRelease: return "release";
    case EventKind::TaskFinish: return "finish";
    case EventKind::TransferFinish: return "transfer";
    }
    return "?";
}

double estimate_exec_time(const Task& task, const NodeSpec& node, const TaskDag& dag,
                          const std::unordered_map<int, int>& parent_locations,
                          const ClusterSpec& cluster) {
    double transfer = 0.0;
    for (int p : dag.parents(task.id)) {
        auto it = parent_locations.find(p);
        if (it != parent_locations.end() && it->second == node.id) continue;
        transfer += dag.tasks[p].input_mb;
    }
    return task.work / node.speed + task.input_mb / node.bandwidth + transfer / node.bandwidth +
           cluster.coord_base + cluster.coord_per_node * cluster.size();
}

ClusterSim::ClusterSim(const TaskDag& dag, const ClusterSpec& spec) : dag_(&dag), spec_(spec) {
    validate(spec_);
    const int n = dag.size();
    status_.assign(n, TaskStatus::Pending);
    remaining_parents_.assign(n, 0);
    task_node_.assign(n, -1);
    start_.assign(n, -1.0);
    finish_.assign(n, -1.0);
    cost_.assign(n, 0.0);
    total_duration_.assign(n, 0.0);
    node_states_.assign(spec_.size(), NodeState{});
    unfinished_ = n;

    for (const Task& t : dag.tasks) remaining_parents_[t.id] = static_cast<int>(dag.parents(t.id).size());
    for (const Task& t : dag.tasks)
        if (remaining_parents_[t.id] == 0) push_event(t.release, EventKind::TaskRelease, t.id, -1);
}

void ClusterSim::push_event(double time, EventKind kind, int task_id, int node_id) {
    events_.push(SimEvent{time, next_seq_++, kind, task_id, node_id});
}

double ClusterSim::next_event_time() const {
    return events_.empty() ? -1.0 : events_.top().time;
}

double ClusterSim::transfer_mb(int task_id, int node_id) const {
    double mb = 0.0;
    for (int p : dag_->parents(task_id)) {
        auto it = completed_location_.find(p);
        if (it != completed_location_.end() && it->second == node_id) continue;
        mb += dag_->tasks[p].input_mb;
    }
    return mb;
}

double ClusterSim::estimate_exec_time_on(int task_id, int node_id) const {
    return estimate_exec_time(dag_->tasks[task_id], spec_.nodes[node_id], *dag_,
                              completed_location_, spec_);
}

bool ClusterSim::can_assign(int task_id, int node_id) const {
    if (task_id < 0 || task_id >= dag_->size()) return false;
    if (node_id < 0 || node_id >= spec_.size()) return false;
    if (status_[task_id] != TaskStatus::Ready) return false;
    const NodeState& ns = node_states_[node_id];
    const NodeSpec& n = spec_.nodes[node_id];
    if (ns.busy_slots >= n.slots) return false;
    if (ns.mem_used + dag_->tasks[task_id].input_mb > n.mem_capacity) return false;
    return true;
}

void ClusterSim::assign(int task_id, int node_id) {
    if (task_id < 0 || task_id >= dag_->size() || node_id < 0 || node_id >= spec_.size())
        throw AssignmentRejected("task or node id out of range");
    if (status_[task_id] != TaskStatus::Ready)
        throw AssignmentRejected("task is not ready");
    NodeState& ns = node_states_[node_id];
    const NodeSpec& node = spec_.nodes[node_id];
    const Task& task = dag_->tasks[task_id];
    if (ns.busy_slots >= node.slots) throw AssignmentRejected("no free slot on node");
    if (ns.mem_used + task.input_mb > node.mem_capacity)
        throw AssignmentRejected("memory exceeded on node");

    ready_.erase({task.release, task_id});
    const double total = estimate_exec_time_on(task_id, node_id);
    const double staged_mb = transfer_mb(task_id, node_id);

    task_node_[task_id] = node_id;
    start_[task_id] = sim_time_;
    cost_[task_id] = task.work * node.cost_rate;
    total_duration_[task_id] = total;

    ns.busy_slots += 1;
    ns.mem_used += task.input_mb;
    ns.io_demand += (task.input_mb + staged_mb) / total;

    if (staged_mb > 0.0) {
        status_[task_id] = TaskStatus::Transferring;
        ns.transferring += 1;
        push_event(sim_time_ + staged_mb / node.bandwidth, EventKind::TransferFinish, task_id, node_id);
    } else {
        status_[task_id] = TaskStatus::Running;
        ns.computing += 1;
    }
    // finish time is anchored on the assignment instant so the total span
    // equals the estimate exactly
    push_event(sim_time_ + total, EventKind::TaskFinish, task_id, node_id);
}

void ClusterSim::make_ready(int task_id) {
    status_[task_id] = TaskStatus::Ready;
    ready_.insert({dag_->tasks[task_id].release, task_id});
}

TaskOutcome ClusterSim::finalize_task(int task_id) {
    const Task& task = dag_->tasks[task_id];
    const int node_id = task_node_[task_id];
    NodeState& ns = node_states_[node_id];

    finish_[task_id] = sim_time_;
    const bool on_time = sim_time_ <= task.deadline; // deadline hit exactly counts as success
    status_[task_id] = on_time ? TaskStatus::Completed : TaskStatus::MissedDeadline;
    unfinished_ -= 1;

    if (ns.computing > 0) ns.computing -= 1;
    ns.busy_slots -= 1;
    ns.mem_used -= task.input_mb;
    ns.io_demand -= (task.input_mb + transfer_mb(task_id, node_id)) / total_duration_[task_id];
    if (ns.io_demand < 0.0) ns.io_demand = 0.0;
    completed_location_[task_id] = node_id;

    for (int c : dag_->children(task_id)) {
        if (--remaining_parents_[c] == 0 && status_[c] == TaskStatus::Pending) make_ready(c);
    }
    // release anchors carry queueing headroom, so a fast task can finish ahead
    // of its anchor; latency is floored at zero for the reward's sake
    return TaskOutcome{task_id, on_time, std::max(0.0, sim_time_ - task.release), cost_[task_id]};
}

ClusterSim::AdvanceResult ClusterSim::advance_next_event() {
    if (events_.empty()) {
        // must be impossible by construction; reaching it is an internal bug
        throw std::logic_error("simulation deadlock: no pending events with unfinished tasks");
    }
    SimEvent ev = events_.top();
    events_.pop();
    sim_time_ = ev.time;
    event_log_.push_back(ev);

    AdvanceResult out;
    out.fired.push_back(ev);
    switch (ev.kind) {
    case EventKind::TaskRelease:
        if (status_[ev.task_id] == TaskStatus::Pending) make_ready(ev.task_id);
        break;
    case EventKind::TransferFinish: {
        if (status_[ev.task_id] == TaskStatus::Transferring) {
            status_[ev.task_id] = TaskStatus::Running;
            NodeState& ns = node_states_[ev.node_id];
            ns.transferring -= 1;
            ns.computing += 1;
        }
        break;
    }
    case EventKind::TaskFinish:
        if (!is_terminal(status_[ev.task_id])) out.finalized.push_back(finalize_task(ev.task_id));
        break;
    }
    return out;
}

std::vector<int> ClusterSim::finalize_at_horizon(double horizon) {
    sim_time_ = horizon;
    std::vector<int> cut;
    for (int id = 0; id < dag_->size(); ++id) {
        if (!is_terminal(status_[id])) {
            status_[id] = TaskStatus::Unfinished;
            unfinished_ -= 1;
            cut.push_back(id);
        }
    }
    ready_.clear();
    return cut;
}

bool ClusterSim::any_free_slot() const {
    for (int i = 0; i < spec_.size(); ++i)
        if (node_states_[i].busy_slots < spec_.nodes[i].slots) return true;
    return false;
}

int ClusterSim::node_of(int task_id) const { return task_node_[task_id]; }

} // namespace etlsched
