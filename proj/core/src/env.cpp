#include "etlsched/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "etlsched/errors.hpp"

namespace etlsched {

double compute_reward(std::span<const TaskOutcome> outcomes, const RewardWeights& w) {
    if (outcomes.empty()) return 0.0;
    const double n = static_cast<double>(outcomes.size());
    double sum_delta = 0.0, sum_t = 0.0, sum_c = 0.0;
    for (const TaskOutcome& o : outcomes) {
        sum_delta += o.success ? 1.0 : 0.0;
        sum_t += std::min(o.latency / w.t_max, 1.0);
        sum_c += std::min(o.cost / w.c_max, 1.0);
    }
    return w.a1 * sum_delta / n - w.a2 * sum_t / n - w.a3 * sum_c / n;
}

static double percentile95(std::vector<double> v) {
    if (v.empty()) return 1.0;
    std::sort(v.begin(), v.end());
    const size_t idx = static_cast<size_t>(std::ceil(0.95 * v.size())) - 1;
    return v[std::min(idx, v.size() - 1)];
}

SchedulingEnv::SchedulingEnv(WorkloadConfig workload, ClusterSpec cluster, EnvConfig cfg)
    : workload_(workload), cluster_(std::move(cluster)), cfg_(cfg) {
    validate(cluster_);
    if (cfg_.reward.a1 < 0 || cfg_.reward.a2 < 0 || cfg_.reward.a3 < 0 ||
        cfg_.reward.a1 + cfg_.reward.a2 + cfg_.reward.a3 <= 0.0)
        throw ConfigError("reward weights must be non-negative with positive sum");
    if (cfg_.defer_cap < 1) throw ConfigError("defer_cap must be >= 1");

    // deadline anchors use the actual cluster means
    double mean_speed = 0.0, mean_bw = 0.0;
    for (const NodeSpec& n : cluster_.nodes) {
        mean_speed += n.speed;
        mean_bw += n.bandwidth;
    }
    workload_.ref_speed = mean_speed / cluster_.size();
    workload_.ref_bandwidth = mean_bw / cluster_.size();
}

std::vector<double> SchedulingEnv::reset(std::uint64_t seed) {
    WorkloadConfig cfg = workload_;
    cfg.seed = seed;
    dag_ = generate_dag(cfg);
    sim_.emplace(dag_, cluster_);

    depths_ = dag_depths(dag_);
    max_depth_ = std::max(1, *std::max_element(depths_.begin(), depths_.end()));
    max_out_degree_ = 1;
    max_work_ = 0.0;
    max_input_ = 0.0;
    for (const Task& t : dag_.tasks) {
        max_out_degree_ = std::max(max_out_degree_, static_cast<int>(dag_.children(t.id).size()));
        max_work_ = std::max(max_work_, t.work);
        max_input_ = std::max(max_input_, t.input_mb);
    }
    if (max_work_ <= 0.0) max_work_ = 1.0;
    if (max_input_ <= 0.0) max_input_ = 1.0;

    // normalization constants and horizon, derived from this episode's workload
    weights_ = cfg_.reward;
    std::vector<double> iso, costs;
    double mean_cost_rate = 0.0;
    for (const NodeSpec& n : cluster_.nodes) mean_cost_rate += n.cost_rate;
    mean_cost_rate /= cluster_.size();
    double serial = 0.0;
    const double coord = cluster_.coord_base + cluster_.coord_per_node * cluster_.size();
    for (const Task& t : dag_.tasks) {
        const double e = isolated_exec_estimate(t, workload_);
        iso.push_back(e);
        costs.push_back(t.work * mean_cost_rate);
        serial += e + coord;
    }
    if (weights_.t_max <= 0.0) weights_.t_max = workload_.deadline_slack * percentile95(iso);
    if (weights_.c_max <= 0.0) weights_.c_max = percentile95(costs);
    horizon_ = cfg_.horizon > 0.0 ? cfg_.horizon : cfg_.horizon_multiplier * serial;

    terminal_ = false;
    consecutive_defers_ = 0;
    step_rewards_.clear();

    // fire the t=0 arrivals and move to the first decision point
    AdvanceOutcome boot;
    advance_to_decision_point(boot);
    return observe();
}

bool SchedulingEnv::at_decision_point() const {
    return !sim_->ready_set().empty() && sim_->any_free_slot();
}

void SchedulingEnv::jump_to_horizon() {
    sim_->finalize_at_horizon(horizon_);
    terminal_ = true;
}

void SchedulingEnv::advance_one_event(AdvanceOutcome& out) {
    if (!sim_->has_pending_events()) {
        if (sim_->all_terminal()) {
            terminal_ = true;
            return;
        }
        if (sim_->ready_set().empty()) {
            // unreachable by construction: pending tasks always have a parent
            // finish or a release event in flight
            throw std::logic_error("deadlock: unfinished tasks with no events and nothing ready");
        }
        // nothing in flight and nothing will arrive; waiting means the episode
        // runs out the clock
        jump_to_horizon();
        return;
    }
    if (sim_->next_event_time() > horizon_) {
        jump_to_horizon();
        return;
    }
    auto fired = sim_->advance_next_event();
    out.finalized.insert(out.finalized.end(), fired.finalized.begin(), fired.finalized.end());
    if (sim_->all_terminal()) terminal_ = true;
}

void SchedulingEnv::advance_to_decision_point(AdvanceOutcome& out) {
    while (!terminal_ && !at_decision_point()) {
        advance_one_event(out);
    }
}

std::vector<char> SchedulingEnv::legal_actions() const {
    std::vector<char> mask(action_count(), 0);
    mask[defer_action()] = 1;
    const int cand = candidate_task();
    if (cand >= 0)
        for (int node = 0; node < cluster_.size(); ++node)
            if (sim_->can_assign(cand, node)) mask[node] = 1;
    return mask;
}

int SchedulingEnv::candidate_task() const {
    if (!sim_ || sim_->ready_set().empty()) return -1;
    return sim_->ready_set().begin()->second;
}

StepResult SchedulingEnv::step(int action) {
    if (terminal_) throw std::logic_error("step() called on a terminal episode");
    if (action < 0 || action >= action_count())
        throw std::logic_error("action index out of range");

    StepResult res;
    AdvanceOutcome adv;
    const int cand = candidate_task();
    double penalty = 0.0;

    if (action == defer_action()) {
        if (!sim_->has_pending_events()) {
            // nothing in flight and nothing will arrive: waiting is meaningless,
            // so this counts as an invalid action; the cap turns persistent
            // waiting into running out the clock
            if (sim_->ready_set().empty())
                throw std::logic_error("deadlock: no events and nothing ready");
            res.info.invalid_action = true;
            penalty -= weights_.a2;
            if (consecutive_defers_ >= cfg_.defer_cap) {
                res.info.defer_cap_hit = true;
                jump_to_horizon();
                consecutive_defers_ = 0;
            } else {
                ++consecutive_defers_;
            }
        } else if (consecutive_defers_ >= cfg_.defer_cap) {
            // defer cap exhausted: flag it, penalize, and force progress
            res.info.defer_cap_hit = true;
            penalty -= weights_.a2;
            advance_one_event(adv);
            advance_to_decision_point(adv);
            consecutive_defers_ = 0;
        } else {
            advance_one_event(adv);
            ++consecutive_defers_;
        }
    } else if (cand < 0 || !sim_->can_assign(cand, action)) {
        // invalid assignment; in masking mode it degrades to a penalty-free defer
        res.info.invalid_action = true;
        if (!cfg_.mask_invalid) penalty -= weights_.a2;
        if (sim_->has_pending_events()) {
            advance_one_event(adv);
            consecutive_defers_ = 0;
        } else if (sim_->ready_set().empty()) {
            throw std::logic_error("deadlock: no events and nothing ready");
        } else if (consecutive_defers_ >= cfg_.defer_cap) {
            // an invalid action with nothing in flight is an ineffective step;
            // the cap bounds how long a policy can stall the clock
            res.info.defer_cap_hit = true;
            jump_to_horizon();
            consecutive_defers_ = 0;
        } else {
            ++consecutive_defers_;
        }
    } else {
        sim_->assign(cand, action);
        advance_to_decision_point(adv);
        consecutive_defers_ = 0;
    }

    res.reward = penalty + compute_reward(adv.finalized, weights_);
    res.info.finalized = std::move(adv.finalized);
    res.terminal = terminal_;
    res.state = observe();
    step_rewards_.push_back(res.reward);
    return res;
}

std::vector<double> SchedulingEnv::observe() const {
    const int n_nodes = cluster_.size();
    std::vector<double> s(state_dim(), 0.0);
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

    const auto& ready = sim_->ready_set();
    const int cand = candidate_task();
    if (cand >= 0) {
        const Task& t = dag_.tasks[cand];
        s[0] = clamp01(t.work / max_work_);
        s[1] = clamp01(t.input_mb / max_input_);
        s[2] = clamp01(static_cast<double>(depths_[cand]) / max_depth_);
        s[3] = clamp01(static_cast<double>(dag_.children(cand).size()) / max_out_degree_);
        s[4] = clamp01(t.priority / 4.0);
        s[5] = t.source == SourceKind::SemiStructuredStream ? 1.0 : 0.0;
    }
    s[6] = clamp01(static_cast<double>(ready.size()) / dag_.size());
    if (!ready.empty()) {
        double slack_sum = 0.0;
        const double now = sim_->sim_time();
        for (const auto& [release, id] : ready) {
            const Task& t = dag_.tasks[id];
            const double span = t.deadline - t.release;
            slack_sum += span > 0.0 ? std::clamp((t.deadline - now) / span, 0.0, 1.0) : 0.0;
        }
        s[7] = clamp01(slack_sum / static_cast<double>(ready.size()));
    }

    for (int i = 0; i < n_nodes; ++i) {
        const NodeState& ns = sim_->node_state(i);
        const NodeSpec& spec = cluster_.nodes[i];
        const int base = 8 + 4 * i;
        s[base + 0] = clamp01(static_cast<double>(ns.computing) / spec.slots);
        s[base + 1] = clamp01(ns.mem_used / spec.mem_capacity);
        s[base + 2] = clamp01(ns.io_demand / spec.bandwidth);
        s[base + 3] = clamp01(static_cast<double>(ns.transferring) / spec.slots);
    }

    const int d = 8 + 4 * n_nodes;
    const double max_rate =
        std::max(workload_.structured.arrival_rate, workload_.stream.arrival_rate);
    const double max_lat = std::max(workload_.structured.base_latency, workload_.stream.base_latency);
    s[d + 0] = max_rate > 0.0 ? clamp01(workload_.structured.arrival_rate / max_rate) : 0.0;
    s[d + 1] = max_lat > 0.0 ? clamp01(workload_.structured.base_latency / max_lat) : 0.0;
    s[d + 2] = max_rate > 0.0 ? clamp01(workload_.stream.arrival_rate / max_rate) : 0.0;
    s[d + 3] = max_lat > 0.0 ? clamp01(workload_.stream.base_latency / max_lat) : 0.0;
    return s;
}

EpisodeTrace SchedulingEnv::trace() const {
    EpisodeTrace tr;
    tr.n_tasks = dag_.size();
    tr.horizon = horizon_;
    tr.makespan = sim_->sim_time();
    tr.t_max = weights_.t_max;
    tr.c_max = weights_.c_max;
    tr.rewards = step_rewards_;
    for (const Task& t : dag_.tasks) {
        TaskRecord rec;
        rec.task_id = t.id;
        rec.release = t.release;
        rec.start = sim_->start_time(t.id);
        rec.finish = sim_->finish_time(t.id);
        const TaskStatus st = sim_->status(t.id);
        rec.status = static_cast<int>(st);
        rec.success = st == TaskStatus::Completed;
        rec.node = sim_->node_of(t.id);
        rec.cost = sim_->cost_of(t.id);
        if (rec.finish >= 0.0) rec.latency = rec.finish - t.release;
        tr.tasks.push_back(rec);
    }
    return tr;
}

} // namespace etlsched
