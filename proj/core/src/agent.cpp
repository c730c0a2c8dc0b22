#include "etlsched/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "etlsched/env.hpp"
#include "etlsched/errors.hpp"

namespace etlsched {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
    ring_.reserve(capacity_);
}

void ReplayBuffer::push(Transition t) {
    if (count_ < capacity_) {
        ring_.push_back(std::move(t));
        ++count_;
    } else {
        ring_[head_] = std::move(t); // strict FIFO eviction
    }
    head_ = (head_ + 1) % capacity_;
    ++inserted_;
}

const Transition& ReplayBuffer::at(size_t k) const {
    if (count_ < capacity_) return ring_[k];
    return ring_[(head_ + k) % capacity_];
}

std::vector<size_t> ReplayBuffer::sample_indices(size_t batch, Rng& rng) const {
    std::vector<size_t> idx(batch);
    for (size_t i = 0; i < batch; ++i)
        idx[i] = static_cast<size_t>(rng.next_u64() % count_);
    return idx;
}

void validate(const AgentConfig& cfg) {
    if (!(cfg.gamma > 0.0) || !(cfg.gamma < 1.0)) throw ConfigError("gamma must be in (0,1)");
    if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
    if (cfg.epsilon_start < 0.0 || cfg.epsilon_start > 1.0 || cfg.epsilon_end < 0.0 ||
        cfg.epsilon_end > 1.0 || cfg.epsilon_end > cfg.epsilon_start)
        throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
    if (cfg.epsilon_decay_steps < 1) throw ConfigError("epsilon_decay_steps must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.target_sync_interval < 1) throw ConfigError("target_sync_interval must be >= 1");
    if (cfg.buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
    if (cfg.warmup_transitions < 1) throw ConfigError("warmup_transitions must be >= 1");
    if (cfg.hidden1 < 1 || cfg.hidden2 < 1) throw ConfigError("hidden sizes must be >= 1");
}

double epsilon_at(const AgentConfig& cfg, long env_step) {
    if (env_step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
    const double frac = static_cast<double>(env_step) / static_cast<double>(cfg.epsilon_decay_steps);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

namespace {

int greedy_over_legal(std::span<const double> q, std::span<const char> legal) {
    int best = -1;
    for (size_t a = 0; a < q.size(); ++a) {
        if (!legal.empty() && !legal[a]) continue;
        if (best < 0 || q[a] > q[best]) best = static_cast<int>(a);
    }
    return best;
}

} // namespace

int select_action(std::span<const double> s, const QNetwork& net, double epsilon, Rng& rng,
                  std::span<const char> legal) {
    const int n_actions = net.out_dim();
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
        if (legal.empty()) return rng.uniform_int(n_actions);
        std::vector<int> options;
        for (int a = 0; a < n_actions; ++a)
            if (legal[a]) options.push_back(a);
        if (options.empty()) return n_actions - 1;
        return options[rng.uniform_int(static_cast<int>(options.size()))];
    }
    const std::vector<double> q = q_values(s, net);
    const int best = greedy_over_legal(q, legal);
    return best >= 0 ? best : n_actions - 1;
}

std::vector<double> td_targets(std::span<const Transition* const> batch, const QNetwork& target_net,
                               const QNetwork& online_net, const AgentConfig& cfg) {
    std::vector<double> y(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = *batch[i];
        if (t.terminal) {
            y[i] = t.r;
            continue;
        }
        const std::span<const char> legal(t.legal_next);
        const std::vector<double> qt = q_values(t.s_next, target_net);
        if (cfg.double_dqn) {
            const std::vector<double> qo = q_values(t.s_next, online_net);
            const int a_star = greedy_over_legal(qo, legal);
            y[i] = t.r + cfg.gamma * qt[a_star];
        } else {
            y[i] = t.r + cfg.gamma * qt[greedy_over_legal(qt, legal)];
        }
    }
    return y;
}

DqnAgent::DqnAgent(int state_dim, int n_actions, AgentConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      online_(QNetwork::init(state_dim, cfg.hidden1, cfg.hidden2, n_actions,
                             derive_run_seed(seed, "qnet-init", 0), cfg.sigmoid_embed)),
      target_(online_),
      opt_(AdamState::init(online_, cfg.lr)),
      buffer_(cfg.buffer_capacity),
      rng_(derive_run_seed(seed, "agent-rng", 0)) {
    validate(cfg_);
}

int DqnAgent::act(std::span<const double> s, std::span<const char> legal) {
    const double eps = epsilon_at(cfg_, env_steps_);
    ++env_steps_;
    return select_action(s, online_, eps, rng_, legal);
}

int DqnAgent::act_greedy(std::span<const double> s, std::span<const char> legal) const {
    const std::vector<double> q = q_values(s, online_);
    const int best = greedy_over_legal(q, legal);
    return best >= 0 ? best : online_.out_dim() - 1;
}

std::optional<double> DqnAgent::observe(Transition t) {
    buffer_.push(std::move(t));
    if (buffer_.size() < static_cast<size_t>(cfg_.warmup_transitions)) return std::nullopt;

    const std::vector<size_t> idx =
        buffer_.sample_indices(static_cast<size_t>(cfg_.batch_size), rng_);
    std::vector<const Transition*> batch(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) batch[i] = &buffer_.at(idx[i]);

    const std::vector<double> y = td_targets(batch, target_, online_, cfg_);
    std::vector<TrainSample> samples(batch.size());
    for (size_t i = 0; i < batch.size(); ++i)
        samples[i] = TrainSample{batch[i]->s, batch[i]->a, y[i]};

    Gradients grads;
    double loss;
    try {
        loss = backward(samples, online_, grads);
        optimizer_step(online_, grads, opt_);
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (gradient step " +
                           std::to_string(grad_steps_ + 1) + ")");
    }
    ++grad_steps_;
    if (grad_steps_ % cfg_.target_sync_interval == 0) sync_target();
    return loss;
}

void DqnAgent::sync_target() { target_ = online_; }

nlohmann::ordered_json agent_config_to_json(const AgentConfig& cfg) {
    nlohmann::ordered_json j;
    j["gamma"] = cfg.gamma;
    j["lr"] = cfg.lr;
    j["epsilon_start"] = cfg.epsilon_start;
    j["epsilon_end"] = cfg.epsilon_end;
    j["epsilon_decay_steps"] = cfg.epsilon_decay_steps;
    j["batch_size"] = cfg.batch_size;
    j["target_sync_interval"] = cfg.target_sync_interval;
    j["buffer_capacity"] = cfg.buffer_capacity;
    j["double_dqn"] = cfg.double_dqn;
    j["warmup_transitions"] = cfg.warmup_transitions;
    j["hidden1"] = cfg.hidden1;
    j["hidden2"] = cfg.hidden2;
    j["sigmoid_embed"] = cfg.sigmoid_embed;
    j["tabular_alpha"] = cfg.tabular_alpha;
    return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig cfg;
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.epsilon_start = j.value("epsilon_start", cfg.epsilon_start);
    cfg.epsilon_end = j.value("epsilon_end", cfg.epsilon_end);
    cfg.epsilon_decay_steps = j.value("epsilon_decay_steps", cfg.epsilon_decay_steps);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.target_sync_interval = j.value("target_sync_interval", cfg.target_sync_interval);
    cfg.buffer_capacity = j.value("buffer_capacity", cfg.buffer_capacity);
    cfg.double_dqn = j.value("double_dqn", cfg.double_dqn);
    cfg.warmup_transitions = j.value("warmup_transitions", cfg.warmup_transitions);
    cfg.hidden1 = j.value("hidden1", cfg.hidden1);
    cfg.hidden2 = j.value("hidden2", cfg.hidden2);
    cfg.sigmoid_embed = j.value("sigmoid_embed", cfg.sigmoid_embed);
    cfg.tabular_alpha = j.value("tabular_alpha", cfg.tabular_alpha);
    return cfg;
}

nlohmann::ordered_json DqnAgent::to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "agent-v1";
    j["config"] = agent_config_to_json(cfg_);
    j["env_steps"] = env_steps_;
    j["grad_steps"] = grad_steps_;
    j["epsilon"] = current_epsilon();
    j["online"] = qnetwork_to_json(online_);
    j["target"] = qnetwork_to_json(target_);
    return j;
}

void DqnAgent::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open agent checkpoint for writing: " + path);
    out << to_json().dump(2) << "\n";
}

DqnAgent DqnAgent::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open agent checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("schema", "") != "agent-v1") throw ConfigError("expected schema agent-v1");
    const AgentConfig cfg = agent_config_from_json(j.at("config"));
    QNetwork online = qnetwork_from_json(j.at("online"));
    DqnAgent agent(online.in_dim(), online.out_dim(), cfg, 0);
    agent.online_ = std::move(online);
    agent.target_ = qnetwork_from_json(j.at("target"));
    agent.env_steps_ = j.at("env_steps").get<long>();
    agent.grad_steps_ = j.at("grad_steps").get<long>();
    agent.opt_ = AdamState::init(agent.online_, cfg.lr);
    return agent;
}

QTable::QTable(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions),
      table_(static_cast<size_t>(n_states) * n_actions, 0.0) {
    if (n_states < 1 || n_actions < 1) throw ConfigError("Q table dimensions must be positive");
}

double QTable::max_q(int s) const {
    double best = q(s, 0);
    for (int a = 1; a < n_actions_; ++a) best = std::max(best, q(s, a));
    return best;
}

int QTable::greedy(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
        if (q(s, a) > q(s, best)) best = a;
    return best;
}

double tabular_q_update(QTable& table, int s, int a, double r, int s_next, bool terminal,
                        double alpha, double gamma) {
    const double bootstrap = terminal ? 0.0 : gamma * table.max_q(s_next);
    double& cell = table.q(s, a);
    cell += alpha * (r + bootstrap - cell);
    return cell;
}

int StateDiscretizer::bucket_of(std::span<const double> state) const {
    // features: x_t[0] work, x_t[1] input, x_t[6] ready fraction,
    // x_t[7] mean slack, mean cpu_util, mean transferring queue
    double mean_cpu = 0.0, mean_queue = 0.0;
    for (int i = 0; i < n_nodes_; ++i) {
        mean_cpu += state[8 + 4 * i + 0];
        mean_queue += state[8 + 4 * i + 3];
    }
    mean_cpu /= n_nodes_;
    mean_queue /= n_nodes_;

    const double feats[kFeatures] = {state[0], state[1], state[6], state[7], mean_cpu, mean_queue};
    int bucket = 0;
    for (double f : feats) {
        int b = static_cast<int>(f * kBucketsPerFeature);
        b = std::clamp(b, 0, kBucketsPerFeature - 1);
        bucket = bucket * kBucketsPerFeature + b;
    }
    return bucket;
}

TabularAgent::TabularAgent(int n_nodes, int n_actions, AgentConfig cfg, std::uint64_t seed)
    : cfg_(cfg), disc_(n_nodes), table_(StateDiscretizer::n_states(), n_actions),
      rng_(derive_run_seed(seed, "tabular-rng", 0)) {
    validate(cfg_);
}

int TabularAgent::act(std::span<const double> s, std::span<const char> legal) {
    const double eps = epsilon_at(cfg_, env_steps_);
    ++env_steps_;
    if (eps > 0.0 && rng_.uniform() < eps) {
        if (legal.empty()) return rng_.uniform_int(table_.n_actions());
        std::vector<int> options;
        for (int a = 0; a < table_.n_actions(); ++a)
            if (legal[a]) options.push_back(a);
        if (options.empty()) return table_.n_actions() - 1;
        return options[rng_.uniform_int(static_cast<int>(options.size()))];
    }
    return act_greedy(s, legal);
}

int TabularAgent::act_greedy(std::span<const double> s, std::span<const char> legal) const {
    const int bucket = disc_.bucket_of(s);
    int best = -1;
    for (int a = 0; a < table_.n_actions(); ++a) {
        if (!legal.empty() && !legal[a]) continue;
        if (best < 0 || table_.q(bucket, a) > table_.q(bucket, best)) best = a;
    }
    return best >= 0 ? best : table_.n_actions() - 1;
}

void TabularAgent::observe(const Transition& t) {
    tabular_q_update(table_, disc_.bucket_of(t.s), t.a, t.r, disc_.bucket_of(t.s_next), t.terminal,
                     cfg_.tabular_alpha, cfg_.gamma);
}

HeuristicPolicy heuristic_from_name(const std::string& name) {
    if (name == "random") return HeuristicPolicy::Random;
    if (name == "roundrobin") return HeuristicPolicy::RoundRobin;
    if (name == "leastloaded") return HeuristicPolicy::LeastLoaded;
    throw ConfigError("unknown heuristic policy: " + name);
}

HeuristicAgent::HeuristicAgent(HeuristicPolicy policy, std::uint64_t seed)
    : policy_(policy), rng_(derive_run_seed(seed, "heuristic-rng", 0)) {}

int HeuristicAgent::act(const SchedulingEnv& env) {
    const std::vector<char> legal = env.legal_actions();
    const int n_nodes = env.n_nodes();
    std::vector<int> nodes;
    for (int a = 0; a < n_nodes; ++a)
        if (legal[a]) nodes.push_back(a);
    if (nodes.empty()) return env.defer_action();

    switch (policy_) {
    case HeuristicPolicy::Random:
        return nodes[rng_.uniform_int(static_cast<int>(nodes.size()))];
    case HeuristicPolicy::RoundRobin: {
        for (int probe = 0; probe < n_nodes; ++probe) {
            const int node = (cursor_ + probe) % n_nodes;
            if (legal[node]) {
                cursor_ = (node + 1) % n_nodes;
                return node;
            }
        }
        return env.defer_action();
    }
    case HeuristicPolicy::LeastLoaded: {
        const int cand = env.candidate_task();
        int best = nodes[0];
        double best_finish = env.sim().estimate_exec_time_on(cand, best);
        for (size_t i = 1; i < nodes.size(); ++i) {
            const double f = env.sim().estimate_exec_time_on(cand, nodes[i]);
            if (f < best_finish) {
                best = nodes[i];
                best_finish = f;
            }
        }
        return best;
    }
    }
    return env.defer_action();
}

} // namespace etlsched
