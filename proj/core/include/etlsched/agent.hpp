#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etlsched/net.hpp"
#include "etlsched/rng.hpp"

namespace etlsched {

class SchedulingEnv;

struct Transition {
    std::vector<double> s;
    int a = 0;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
    // legality of each action in s_next; empty means all legal. Selection is
    // masked to the legal set, so bootstrap maxima must be masked the same
    // way or they feed on Q values no data ever grounds.
    std::vector<char> legal_next;
};

// fixed-capacity ring with strict FIFO eviction and uniform sampling
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void push(Transition t);
    size_t size() const { return count_; }
    size_t capacity() const { return capacity_; }
    long inserted() const { return inserted_; }

    // k-th oldest surviving transition, k in [0, size)
    const Transition& at(size_t k) const;

    std::vector<size_t> sample_indices(size_t batch, Rng& rng) const;

private:
    std::vector<Transition> ring_;
    size_t capacity_;
    size_t head_ = 0; // next write position
    size_t count_ = 0;
    long inserted_ = 0;
};

struct AgentConfig {
    double gamma = 0.95;
    double lr = 5e-4;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    long epsilon_decay_steps = 20000;
    int batch_size = 64;
    int target_sync_interval = 500; // gradient steps between hard target copies
    size_t buffer_capacity = 50000;
    bool double_dqn = false;
    long warmup_transitions = 1000;
    int hidden1 = 64;
    int hidden2 = 32;
    bool sigmoid_embed = true;
    double tabular_alpha = 0.1; // learning rate for the tabular baseline
};

void validate(const AgentConfig& cfg); // throws ConfigError

nlohmann::ordered_json agent_config_to_json(const AgentConfig& cfg);
AgentConfig agent_config_from_json(const nlohmann::json& j);

// linear decay from epsilon_start to epsilon_end over epsilon_decay_steps,
// constant afterwards
double epsilon_at(const AgentConfig& cfg, long env_step);

// epsilon-greedy over the legal set; greedy ties break to the lowest index.
// An empty mask means every action is legal.
int select_action(std::span<const double> s, const QNetwork& net, double epsilon, Rng& rng,
                  std::span<const char> legal = {});

// TD targets per the standard rule y = r + gamma * max_a Q'(s', a), with the
// double-DQN variant evaluating the target net at the online argmax
std::vector<double> td_targets(std::span<const Transition* const> batch, const QNetwork& target_net,
                               const QNetwork& online_net, const AgentConfig& cfg);

class DqnAgent {
public:
    DqnAgent(int state_dim, int n_actions, AgentConfig cfg, std::uint64_t seed);

    // schedule-driven epsilon; advances the env-step counter
    int act(std::span<const double> s, std::span<const char> legal = {});
    int act_greedy(std::span<const double> s, std::span<const char> legal = {}) const;

    // stores the transition and runs a gradient step when past warmup;
    // returns the loss when a step ran
    std::optional<double> observe(Transition t);

    void sync_target();
    const QNetwork& online() const { return online_; }
    const QNetwork& target() const { return target_; }
    const AgentConfig& config() const { return cfg_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    long env_steps() const { return env_steps_; }
    long grad_steps() const { return grad_steps_; }
    double current_epsilon() const { return epsilon_at(cfg_, env_steps_); }

    // "agent-v1": both networks plus config echo and counters
    nlohmann::ordered_json to_json() const;
    void save(const std::string& path) const;
    static DqnAgent load(const std::string& path);

private:
    AgentConfig cfg_;
    QNetwork online_;
    QNetwork target_;
    AdamState opt_;
    ReplayBuffer buffer_;
    Rng rng_;
    long env_steps_ = 0;
    long grad_steps_ = 0;
};

// dense Q table over discretized states
class QTable {
public:
    QTable(int n_states, int n_actions);

    double& q(int s, int a) { return table_[static_cast<size_t>(s) * n_actions_ + a]; }
    double q(int s, int a) const { return table_[static_cast<size_t>(s) * n_actions_ + a]; }
    double max_q(int s) const;
    int greedy(int s) const; // lowest-index tie-break
    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

private:
    int n_states_;
    int n_actions_;
    std::vector<double> table_;
};

// Q[s,a] += alpha * (r + gamma * max_a' Q[s',a'] - Q[s,a]); terminal
// transitions bootstrap from zero. Returns the updated cell value.
double tabular_q_update(QTable& table, int s, int a, double r, int s_next, bool terminal,
                        double alpha, double gamma);

// Maps the environment observation onto 3^6 buckets using six
// dimension-independent features: candidate work, candidate input size,
// ready fraction, mean ready slack, mean node cpu utilization, mean node
// data-wait queue. Each feature gets 3 equal-width buckets over [0,1].
class StateDiscretizer {
public:
    explicit StateDiscretizer(int n_nodes) : n_nodes_(n_nodes) {}
    static constexpr int kBucketsPerFeature = 3;
    static constexpr int kFeatures = 6;
    static constexpr int n_states() { return 729; } // 3^6

    int bucket_of(std::span<const double> state) const;

private:
    int n_nodes_;
};

// epsilon-greedy tabular Q-learning over the discretized observation
class TabularAgent {
public:
    TabularAgent(int n_nodes, int n_actions, AgentConfig cfg, std::uint64_t seed);

    int act(std::span<const double> s, std::span<const char> legal = {});
    int act_greedy(std::span<const double> s, std::span<const char> legal = {}) const;
    void observe(const Transition& t);

    const QTable& table() const { return table_; }
    long env_steps() const { return env_steps_; }

private:
    AgentConfig cfg_;
    StateDiscretizer disc_;
    QTable table_;
    Rng rng_;
    long env_steps_ = 0;
};

enum class HeuristicPolicy { Random, RoundRobin, LeastLoaded };

HeuristicPolicy heuristic_from_name(const std::string& name);

// Non-learning baselines. All of them defer only when no node can take the
// candidate task.
class HeuristicAgent {
public:
    HeuristicAgent(HeuristicPolicy policy, std::uint64_t seed);
    int act(const SchedulingEnv& env);

private:
    HeuristicPolicy policy_;
    Rng rng_;
    int cursor_ = 0; // RoundRobin's persistent position
};

} // namespace etlsched
