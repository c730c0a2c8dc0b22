#include "etlsched/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "etlsched/errors.hpp"
#include "etlsched/rng.hpp"

namespace fs = std::filesystem;

namespace etlsched {

AgentKind agent_kind_from_name(const std::string& name) {
    if (name == "dqn") return AgentKind::Dqn;
    if (name == "ddqn") return AgentKind::Ddqn;
    if (name == "qtable") return AgentKind::QTable;
    if (name == "random") return AgentKind::Random;
    if (name == "roundrobin") return AgentKind::RoundRobin;
    if (name == "leastloaded") return AgentKind::LeastLoaded;
    throw ConfigError("unknown agent '" + name +
                      "' (valid: dqn, ddqn, qtable, random, roundrobin, leastloaded)");
}

std::string agent_kind_name(AgentKind kind) {
    switch (kind) {
    case AgentKind::Dqn: return "dqn";
    case AgentKind::Ddqn: return "ddqn";
    case AgentKind::QTable: return "qtable";
    case AgentKind::Random: return "random";
    case AgentKind::RoundRobin: return "roundrobin";
    case AgentKind::LeastLoaded: return "leastloaded";
    }
    return "?";
}

bool is_learning(AgentKind kind) {
    return kind == AgentKind::Dqn || kind == AgentKind::Ddqn || kind == AgentKind::QTable;
}

std::vector<AgentKind> parse_agent_list(const std::string& comma_separated) {
    std::vector<AgentKind> agents;
    std::stringstream ss(comma_separated);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) agents.push_back(agent_kind_from_name(item));
    if (agents.empty()) throw ConfigError("agent list is empty");
    return agents;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema"] = "runcfg-v1";
    j["workload"] = workload_config_to_json(cfg.workload);
    nlohmann::ordered_json cj;
    if (cfg.explicit_cluster) {
        cj = cluster_spec_to_json(*cfg.explicit_cluster);
    } else {
        cj["profile"] = cfg.cluster_profile;
        cj["n_nodes"] = cfg.n_nodes;
        cj["coord_base"] = cfg.coord_base;
        cj["coord_per_node"] = cfg.coord_per_node;
    }
    j["cluster"] = cj;
    j["env"] = {{"reward", {{"a1", cfg.env.reward.a1},
                            {"a2", cfg.env.reward.a2},
                            {"a3", cfg.env.reward.a3},
                            {"t_max", cfg.env.reward.t_max},
                            {"c_max", cfg.env.reward.c_max}}},
                {"horizon", cfg.env.horizon},
                {"horizon_multiplier", cfg.env.horizon_multiplier},
                {"defer_cap", cfg.env.defer_cap},
                {"mask_invalid", cfg.env.mask_invalid}};
    j["agent"] = agent_config_to_json(cfg.agent);
    j["episodes"] = cfg.episodes;
    j["eval_episodes"] = cfg.eval_episodes;
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir;
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (j.contains("schema") && j.at("schema") != "runcfg-v1")
        throw ConfigError("expected schema runcfg-v1, got " + j.at("schema").dump());
    RunConfig cfg;
    if (j.contains("workload")) cfg.workload = workload_config_from_json(j.at("workload"));
    if (j.contains("cluster")) {
        const auto& cj = j.at("cluster");
        if (cj.contains("nodes")) {
            cfg.explicit_cluster = cluster_spec_from_json(cj);
        } else {
            cfg.cluster_profile = cj.value("profile", cfg.cluster_profile);
            if (cfg.cluster_profile != "default-hetero-v1")
                throw ConfigError("unknown cluster profile: " + cfg.cluster_profile);
            cfg.n_nodes = cj.value("n_nodes", cfg.n_nodes);
            cfg.coord_base = cj.value("coord_base", cfg.coord_base);
            cfg.coord_per_node = cj.value("coord_per_node", cfg.coord_per_node);
            if (cfg.n_nodes < 1) throw ConfigError("cluster.n_nodes must be >= 1");
        }
    }
    if (j.contains("env")) {
        const auto& ej = j.at("env");
        if (ej.contains("reward")) {
            const auto& rj = ej.at("reward");
            cfg.env.reward.a1 = rj.value("a1", cfg.env.reward.a1);
            cfg.env.reward.a2 = rj.value("a2", cfg.env.reward.a2);
            cfg.env.reward.a3 = rj.value("a3", cfg.env.reward.a3);
            cfg.env.reward.t_max = rj.value("t_max", cfg.env.reward.t_max);
            cfg.env.reward.c_max = rj.value("c_max", cfg.env.reward.c_max);
        }
        cfg.env.horizon = ej.value("horizon", cfg.env.horizon);
        cfg.env.horizon_multiplier = ej.value("horizon_multiplier", cfg.env.horizon_multiplier);
        cfg.env.defer_cap = ej.value("defer_cap", cfg.env.defer_cap);
        cfg.env.mask_invalid = ej.value("mask_invalid", cfg.env.mask_invalid);
    }
    if (j.contains("agent")) cfg.agent = agent_config_from_json(j.at("agent"));
    cfg.episodes = j.value("episodes", cfg.episodes);
    cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.output_dir = j.value("output_dir", cfg.output_dir);

    if (cfg.seeds.empty()) throw ConfigError("seeds must contain at least one entry");
    if (cfg.episodes < 1) throw ConfigError("episodes must be >= 1");
    if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    validate(cfg.agent);
    return cfg;
}

void apply_override(nlohmann::ordered_json& j, const std::string& dotted_assignment) {
    const size_t eq = dotted_assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like path.to.field=value: " + dotted_assignment);
    std::string path = dotted_assignment.substr(0, eq);
    const std::string value = dotted_assignment.substr(eq + 1);
    std::replace(path.begin(), path.end(), '.', '/');
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value; // plain string
    }
    j[nlohmann::ordered_json::json_pointer("/" + path)] = parsed;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // e.byte is 1-based; count newlines before it for a line-precise report
        size_t line = 1;
        for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
    }
    for (const std::string& ov : overrides) apply_override(j, ov);
    try {
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ClusterSpec build_cluster(const RunConfig& cfg, std::uint64_t run_seed) {
    if (cfg.explicit_cluster) return *cfg.explicit_cluster;
    return default_hetero_profile(cfg.n_nodes, derive_run_seed(run_seed, "cluster", 0),
                                  cfg.coord_base, cfg.coord_per_node);
}

std::uint64_t config_fingerprint(const RunConfig& cfg) {
    nlohmann::ordered_json j = run_config_to_json(cfg);
    j.erase("agent");
    j.erase("output_dir");
    return fnv1a64(j.dump());
}

namespace {

struct EpisodeStats {
    int steps = 0;
    double reward_sum = 0.0;
    double discounted_return = 0.0;
};

// one episode with any policy; `train` toggles learning updates
template <typename ActFn, typename ObserveFn>
EpisodeStats play_episode(SchedulingEnv& env, std::uint64_t episode_seed, double gamma,
                          ActFn&& act, ObserveFn&& observe) {
    EpisodeStats stats;
    std::vector<double> s = env.reset(episode_seed);
    const long max_steps = 1000 + 200L * env.dag().size(); // progress guard
    double discount = 1.0;
    while (!env.terminal()) {
        const std::vector<char> legal = env.legal_actions();
        const int action = act(s, legal);
        StepResult res = env.step(action);
        observe(s, action, res);
        stats.reward_sum += res.reward;
        stats.discounted_return += discount * res.reward;
        discount *= gamma;
        s = std::move(res.state);
        if (++stats.steps > max_steps)
            throw NumericError("episode exceeded the step bound; simulator stuck");
    }
    return stats;
}

} // namespace

RunResult run_agent(const RunConfig& cfg, AgentKind kind, std::uint64_t seed) {
    const ClusterSpec cluster = build_cluster(cfg, seed);
    SchedulingEnv env(cfg.workload, cluster, cfg.env);
    const double gamma = cfg.agent.gamma;

    RunResult out;

    // policy closures per agent kind
    std::optional<DqnAgent> dqn;
    std::optional<TabularAgent> qtab;
    std::optional<HeuristicAgent> heuristic;
    AgentConfig agent_cfg = cfg.agent;
    if (kind == AgentKind::Ddqn) agent_cfg.double_dqn = true;
    switch (kind) {
    case AgentKind::Dqn:
    case AgentKind::Ddqn:
        dqn.emplace(env.state_dim(), env.action_count(), agent_cfg,
                    derive_run_seed(seed, "agent", 0));
        break;
    case AgentKind::QTable:
        qtab.emplace(env.n_nodes(), env.action_count(), agent_cfg,
                     derive_run_seed(seed, "agent", 0));
        break;
    case AgentKind::Random:
        heuristic.emplace(HeuristicPolicy::Random, derive_run_seed(seed, "agent", 0));
        break;
    case AgentKind::RoundRobin:
        heuristic.emplace(HeuristicPolicy::RoundRobin, derive_run_seed(seed, "agent", 0));
        break;
    case AgentKind::LeastLoaded:
        heuristic.emplace(HeuristicPolicy::LeastLoaded, derive_run_seed(seed, "agent", 0));
        break;
    }

    if (is_learning(kind)) {
        for (int ep = 0; ep < cfg.episodes; ++ep) {
            const std::uint64_t ep_seed = derive_run_seed(seed, "train-ep", ep);
            EpisodeStats st = play_episode(
                env, ep_seed, gamma,
                [&](const std::vector<double>& s, const std::vector<char>& legal) {
                    return dqn ? dqn->act(s, legal) : qtab->act(s, legal);
                },
                [&](const std::vector<double>& s, int a, const StepResult& res) {
                    Transition t{s, a, res.reward, res.state, res.terminal,
                                 res.terminal ? std::vector<char>{} : env.legal_actions()};
                    if (dqn)
                        dqn->observe(std::move(t));
                    else
                        qtab->observe(t);
                });
            out.curve.push_back({seed, ep, false, st.steps, st.reward_sum, st.discounted_return});
        }
    }

    // greedy evaluation episodes feed the metrics
    std::vector<EpisodeTrace> traces;
    for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
        const std::uint64_t ep_seed = derive_run_seed(seed, "eval-ep", ep);
        EpisodeStats st = play_episode(
            env, ep_seed, gamma,
            [&](const std::vector<double>& s, const std::vector<char>& legal) -> int {
                if (dqn) return dqn->act_greedy(s, legal);
                if (qtab) return qtab->act_greedy(s, legal);
                return heuristic->act(env);
            },
            [](const std::vector<double>&, int, const StepResult&) {});
        out.curve.push_back({seed, ep, true, st.steps, st.reward_sum, st.discounted_return});
        traces.push_back(env.trace());
        out.eval_event_logs.push_back(env.sim().event_log());
    }

    out.report = compute_metrics(traces, gamma);
    out.report.seeds = {seed};
    out.report.config_fingerprint = config_fingerprint(cfg);
    out.eval_traces = std::move(traces);
    if (dqn) out.checkpoint = dqn->to_json();
    return out;
}

namespace {

// deterministic-order parallel map: results land in input order
template <typename Work>
void run_jobs(int jobs, int n, Work&& work) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (int i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int threads = std::min(jobs, n);
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

BenchResult run_bench(const RunConfig& cfg, const std::vector<AgentKind>& agents, int jobs) {
    if (agents.empty()) throw ConfigError("bench needs at least one agent");

    struct Cell {
        AgentKind kind;
        std::uint64_t seed;
        RunResult result;
    };
    std::vector<Cell> cells;
    for (AgentKind kind : agents)
        for (std::uint64_t seed : cfg.seeds) cells.push_back({kind, seed, {}});

    std::vector<std::string> errors(cells.size());
    run_jobs(jobs, static_cast<int>(cells.size()), [&](int i) {
        try {
            cells[i].result = run_agent(cfg, cells[i].kind, cells[i].seed);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (size_t i = 0; i < cells.size(); ++i)
        if (!errors[i].empty())
            throw NumericError("bench run " + agent_kind_name(cells[i].kind) + "/seed " +
                               std::to_string(cells[i].seed) + " failed: " + errors[i]);

    BenchResult out;
    const double gamma = cfg.agent.gamma;
    size_t idx = 0;
    for (AgentKind kind : agents) {
        const std::string name = agent_kind_name(kind);
        std::vector<EpisodeTrace> pooled;
        for (size_t s = 0; s < cfg.seeds.size(); ++s, ++idx) {
            out.per_seed[name].push_back(cells[idx].result.report);
            pooled.insert(pooled.end(), cells[idx].result.eval_traces.begin(),
                          cells[idx].result.eval_traces.end());
        }
        MetricsReport agg = compute_metrics(pooled, gamma);
        agg.seeds = cfg.seeds;
        agg.config_fingerprint = config_fingerprint(cfg);
        out.aggregate[name] = agg;
    }
    if (out.aggregate.size() >= 2) {
        out.table = compare_reports(out.aggregate);
    } else {
        // a single agent still gets a (trivially ranked) one-row table
        const auto& [name, rep] = *out.aggregate.begin();
        out.table.rows.push_back({name, rep, 1, 1, 1, 1});
    }
    return out;
}

SweepSpec::Param sweep_param_from_name(const std::string& name) {
    if (name == "lr" || name == "learning_rate") return SweepSpec::Param::LearningRate;
    if (name == "gamma") return SweepSpec::Param::Gamma;
    if (name == "nodes" || name == "node_count") return SweepSpec::Param::NodeCount;
    throw ConfigError("unknown sweep param '" + name + "' (valid: lr, gamma, nodes)");
}

std::string sweep_param_name(SweepSpec::Param p) {
    switch (p) {
    case SweepSpec::Param::LearningRate: return "lr";
    case SweepSpec::Param::Gamma: return "gamma";
    case SweepSpec::Param::NodeCount: return "nodes";
    }
    return "?";
}

std::string sweep_metric_name(SweepSpec::Param p) {
    return p == SweepSpec::Param::LearningRate ? "avg_cum_reward" : "asd";
}

void validate(const SweepSpec& spec) {
    if (spec.grid.empty()) throw ConfigError("sweep grid is empty");
    for (double v : spec.grid) {
        switch (spec.param) {
        case SweepSpec::Param::LearningRate:
            if (!(v > 0.0)) throw ConfigError("learning rate grid values must be positive");
            break;
        case SweepSpec::Param::Gamma:
            if (!(v > 0.0) || !(v < 1.0)) throw ConfigError("gamma grid values must be in (0,1)");
            break;
        case SweepSpec::Param::NodeCount:
            if (v < 1.0 || v != std::floor(v))
                throw ConfigError("node count grid values must be positive integers");
            break;
        }
    }
}

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
    validate(spec);
    SweepResult out;
    out.param_name = sweep_param_name(spec.param);
    out.metric_name = sweep_metric_name(spec.param);

    const size_t n_seeds = spec.base.seeds.size();
    out.cells.resize(spec.grid.size() * n_seeds);
    run_jobs(jobs, static_cast<int>(out.cells.size()), [&](int i) {
        const size_t gi = static_cast<size_t>(i) / n_seeds;
        const size_t si = static_cast<size_t>(i) % n_seeds;
        SweepCell& cell = out.cells[i];
        cell.value = spec.grid[gi];
        cell.seed = spec.base.seeds[si];
        try {
            RunConfig cfg = spec.base;
            switch (spec.param) {
            case SweepSpec::Param::LearningRate: cfg.agent.lr = cell.value; break;
            case SweepSpec::Param::Gamma: cfg.agent.gamma = cell.value; break;
            case SweepSpec::Param::NodeCount:
                cfg.n_nodes = static_cast<int>(cell.value);
                cfg.explicit_cluster.reset(); // always rebuild from the profile
                break;
            }
            const RunResult run = run_agent(cfg, spec.agent, cell.seed);
            cell.metric = spec.param == SweepSpec::Param::LearningRate
                              ? run.report.avg_cum_reward
                              : run.report.asd;
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
            cell.metric = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return out;
}

std::vector<SweepResult::SummaryRow> SweepResult::summary() const {
    std::vector<SummaryRow> rows;
    for (size_t i = 0; i < cells.size();) {
        const double value = cells[i].value;
        SummaryRow row;
        row.value = value;
        double sum = 0.0;
        std::vector<double> ok;
        for (; i < cells.size() && cells[i].value == value; ++i) {
            if (!cells[i].failed) {
                ok.push_back(cells[i].metric);
                sum += cells[i].metric;
            }
        }
        row.n = static_cast<int>(ok.size());
        if (row.n > 0) {
            row.mean = sum / row.n;
            double var = 0.0;
            for (double v : ok) var += (v - row.mean) * (v - row.mean);
            row.sd = row.n > 1 ? std::sqrt(var / (row.n - 1)) : 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string SweepResult::to_long_csv() const {
    std::ostringstream os;
    os << "param,value,seed," << metric_name << ",status\n";
    for (const SweepCell& c : cells) {
        os << param_name << ',' << fmt_double(c.value) << ',' << c.seed << ','
           << (c.failed ? "nan" : fmt_double(c.metric)) << ',' << (c.failed ? "error" : "ok")
           << '\n';
    }
    return os.str();
}

std::string SweepResult::to_summary_csv() const {
    std::ostringstream os;
    os << "param,value,mean,sd,n\n";
    for (const SummaryRow& r : summary())
        os << param_name << ',' << fmt_double(r.value) << ',' << fmt_double(r.mean) << ','
           << fmt_double(r.sd) << ',' << r.n << '\n';
    return os.str();
}

std::string curve_to_csv(const std::vector<EpisodePoint>& curve) {
    std::ostringstream os;
    os << "seed,episode,phase,steps,reward_sum,discounted_return\n";
    for (const EpisodePoint& p : curve) {
        os << p.seed << ',' << p.episode << ',' << (p.eval ? "eval" : "train") << ',' << p.steps
           << ',' << fmt_double(p.reward_sum) << ',' << fmt_double(p.discounted_return) << '\n';
    }
    return os.str();
}

std::string event_log_to_jsonl(const std::vector<std::vector<SimEvent>>& episodes) {
    std::ostringstream os;
    for (size_t ep = 0; ep < episodes.size(); ++ep) {
        for (const SimEvent& ev : episodes[ep]) {
            nlohmann::ordered_json j;
            j["episode"] = ep;
            j["time"] = ev.time;
            j["seq"] = ev.seq;
            j["kind"] = event_kind_name(ev.kind);
            j["task"] = ev.task_id;
            j["node"] = ev.node_id;
            os << j.dump() << '\n';
        }
    }
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ConfigError("cannot create output directory: " + dir +
                          (ec ? " (" + ec.message() + ")" : ""));
    // verify writability up front so failures map to a config error
    const fs::path probe = fs::path(dir) / ".write_probe";
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory is not writable: " + dir);
    f.close();
    fs::remove(probe, ec);
}

} // namespace etlsched
