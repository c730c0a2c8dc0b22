// etlsched — deep Q-learning scheduler for synthetic ETL workloads on a
// simulated heterogeneous cluster.
//
// Subcommands: train, bench, sweep, plot, gen-workload. Exit codes: 0 ok,
// 2 configuration/usage error, 3 numeric/internal failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "etlsched/errors.hpp"
#include "etlsched/harness.hpp"
#include "etlsched/svgplot.hpp"

namespace fs = std::filesystem;
using namespace etlsched;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::vector<std::uint64_t> seeds;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    bool trace = false;
};

std::string default_out_root() {
    const char* env = std::getenv("ETLSCHED_OUT_ROOT");
    return env && *env ? env : ".";
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = load_run_config(opts.config_path, opts.overrides);
    } else if (!opts.overrides.empty()) {
        nlohmann::ordered_json j = run_config_to_json(cfg);
        for (const auto& ov : opts.overrides) apply_override(j, ov);
        cfg = run_config_from_json(j);
    }
    if (opts.seed_set) cfg.seeds = {opts.seed};
    if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (cfg.output_dir.empty()) cfg.output_dir = default_out_root() + "/etlsched-out";
    return cfg;
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_seeds = true) {
    cmd->add_option("--config", opts.config_path, "run config JSON (runcfg-v1)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--set", opts.overrides, "config override, dotted path (e.g. agent.lr=1e-4)");
    if (with_seeds) {
        cmd->add_option("--seed", opts.seed, "single master seed")->each([&](const std::string&) {
            opts.seed_set = true;
        });
        cmd->add_option("--seeds", opts.seeds, "comma/space separated master seeds")->delimiter(',');
    }
    cmd->add_option("--jobs", opts.jobs, "parallel runs (default: hardware threads)");
}

void write_train_artifacts(const RunConfig& cfg, const std::vector<RunResult>& results, bool trace) {
    ensure_output_dir(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    std::vector<EpisodePoint> curve;
    std::vector<EpisodeTrace> pooled;
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    for (size_t i = 0; i < results.size(); ++i) {
        const RunResult& r = results[i];
        curve.insert(curve.end(), r.curve.begin(), r.curve.end());
        pooled.insert(pooled.end(), r.eval_traces.begin(), r.eval_traces.end());
        nlohmann::ordered_json sj;
        sj["seed"] = cfg.seeds[i];
        sj["report"] = metrics_report_to_json(r.report);
        per_seed.push_back(std::move(sj));
        if (r.checkpoint)
            write_text_file((dir / ("checkpoint_seed" + std::to_string(cfg.seeds[i]) + ".json")).string(),
                            r.checkpoint->dump(2) + "\n");
        if (trace)
            write_text_file((dir / ("trace_seed" + std::to_string(cfg.seeds[i]) + ".jsonl")).string(),
                            event_log_to_jsonl(r.eval_event_logs));
    }
    write_text_file((dir / "reward_curve.csv").string(), curve_to_csv(curve));

    MetricsReport agg = compute_metrics(pooled, cfg.agent.gamma);
    agg.seeds = cfg.seeds;
    agg.config_fingerprint = config_fingerprint(cfg);
    nlohmann::ordered_json mj;
    mj["aggregate"] = metrics_report_to_json(agg);
    mj["per_seed"] = std::move(per_seed);
    write_text_file((dir / "metrics.json").string(), mj.dump(2) + "\n");
}

int cmd_train(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    std::vector<RunResult> results(cfg.seeds.size());
    std::vector<std::string> errors(cfg.seeds.size());
    std::atomic<int> next{0};
    const int jobs = std::min<int>(effective_jobs(opts.jobs), static_cast<int>(cfg.seeds.size()));
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < static_cast<int>(cfg.seeds.size());
                 i = next.fetch_add(1)) {
                try {
                    results[i] = run_agent(cfg, AgentKind::Dqn, cfg.seeds[i]);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw NumericError("seed " + std::to_string(cfg.seeds[i]) + ": " + errors[i]);

    write_train_artifacts(cfg, results, opts.trace);
    std::cout << "train: wrote reward_curve.csv, metrics.json and " << cfg.seeds.size()
              << " checkpoint(s) to " << cfg.output_dir << "\n";
    return 0;
}

int cmd_bench(const CommonOpts& opts, const std::string& agents_csv) {
    const RunConfig cfg = resolve_config(opts);
    const std::vector<AgentKind> agents = parse_agent_list(agents_csv);
    const BenchResult bench = run_bench(cfg, agents, effective_jobs(opts.jobs));

    ensure_output_dir(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    // per-seed rows followed by aggregate rows, fixed column order
    std::ostringstream csv;
    csv << "agent,scope,asd,tcr,tp,rc,avg_cum_reward\n";
    for (const AgentKind kind : agents) {
        const std::string name = agent_kind_name(kind);
        const auto& reports = bench.per_seed.at(name);
        for (size_t s = 0; s < reports.size(); ++s) {
            const MetricsReport& r = reports[s];
            csv << name << ',' << cfg.seeds[s] << ',' << fmt_double(r.asd) << ',' << fmt_double(r.tcr)
                << ',' << fmt_double(r.tp) << ',' << fmt_double(r.rc) << ','
                << fmt_double(r.avg_cum_reward) << '\n';
        }
        const MetricsReport& a = bench.aggregate.at(name);
        csv << name << ",aggregate," << fmt_double(a.asd) << ',' << fmt_double(a.tcr) << ','
            << fmt_double(a.tp) << ',' << fmt_double(a.rc) << ',' << fmt_double(a.avg_cum_reward)
            << '\n';
    }
    write_text_file((dir / "bench_metrics.csv").string(), csv.str());
    write_text_file((dir / "comparison.csv").string(), bench.table.to_csv());
    write_text_file((dir / "comparison.json").string(), bench.table.to_json().dump(2) + "\n");

    std::cout << bench.table.to_text();
    std::cout << "bench: wrote bench_metrics.csv, comparison.csv, comparison.json to "
              << cfg.output_dir << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& param, std::vector<double> grid,
              const std::string& agent_name) {
    SweepSpec spec;
    spec.base = resolve_config(opts);
    spec.param = sweep_param_from_name(param);
    spec.grid = std::move(grid);
    spec.agent = agent_kind_from_name(agent_name);
    validate(spec);

    const SweepResult result = run_sweep(spec, effective_jobs(opts.jobs));

    ensure_output_dir(spec.base.output_dir);
    const fs::path dir(spec.base.output_dir);
    write_text_file((dir / "sweep.csv").string(), result.to_long_csv());
    write_text_file((dir / "sweep_summary.csv").string(), result.to_summary_csv());

    for (const auto& row : result.summary())
        std::cout << result.param_name << "=" << fmt_double(row.value) << "  "
                  << result.metric_name << " = " << fmt_double(row.mean) << " +- "
                  << fmt_double(row.sd) << " (n=" << row.n << ")\n";
    std::cout << "sweep: wrote sweep.csv, sweep_summary.csv to " << spec.base.output_dir << "\n";
    return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& kind, const std::string& out_path) {
    if (kind != "line") throw ConfigError("unknown plot kind: " + kind + " (only 'line')");
    const SweepSeries series = read_sweep_csv_file(csv_path);
    write_text_file(out_path, render_line_chart_svg(series));
    std::cout << "plot: wrote " << out_path << "\n";
    return 0;
}

int cmd_gen_workload(const CommonOpts& opts, const std::string& out_path) {
    RunConfig cfg = resolve_config(opts);
    WorkloadConfig wl = cfg.workload;
    if (opts.seed_set) wl.seed = opts.seed;
    const TaskDag dag = generate_dag(wl);
    write_text_file(out_path, dag_to_json(dag, wl).dump(2) + "\n");
    std::cout << "gen-workload: wrote " << dag.size() << " tasks, " << dag.edges.size()
              << " edges to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep Q-learning ETL scheduling simulator"};
    app.require_subcommand(1);

    CommonOpts train_opts, bench_opts, sweep_opts, gen_opts;
    std::string agents_csv = "dqn,random,roundrobin,leastloaded";
    std::string sweep_param, sweep_agent = "dqn";
    std::vector<double> sweep_grid;
    std::string plot_csv, plot_kind = "line", plot_out = "chart.svg";
    std::string gen_out = "dag.json";

    CLI::App* train = app.add_subcommand("train", "train the DQN agent and write artifacts");
    add_common(train, train_opts);
    train->add_flag("--trace", train_opts.trace, "dump eval event traces as JSON Lines");

    CLI::App* bench = app.add_subcommand("bench", "compare agents on an identical setup");
    add_common(bench, bench_opts);
    bench->add_option("--agents", agents_csv, "comma-separated agent list");
    bench->add_flag("--trace", bench_opts.trace, "dump eval event traces as JSON Lines");

    CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter sensitivity sweep");
    add_common(sweep, sweep_opts);
    sweep->add_option("--param", sweep_param, "lr | gamma | nodes")->required();
    sweep->add_option("--grid", sweep_grid, "grid values")->delimiter(',')->required();
    sweep->add_option("--agent", sweep_agent, "agent to sweep (default dqn)");

    CLI::App* plot = app.add_subcommand("plot", "render a sweep CSV as an SVG line chart");
    plot->add_option("--csv", plot_csv, "sweep long-form CSV")->required();
    plot->add_option("--kind", plot_kind, "chart kind (line)");
    plot->add_option("--out", plot_out, "output SVG path");

    CLI::App* gen = app.add_subcommand("gen-workload", "generate a task DAG and dump it as JSON");
    add_common(gen, gen_opts);
    gen->add_option("--dag-out", gen_out, "output DAG JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(train_opts);
        if (bench->parsed()) return cmd_bench(bench_opts, agents_csv);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_grid, sweep_agent);
        if (plot->parsed()) return cmd_plot(plot_csv, plot_kind, plot_out);
        if (gen->parsed()) return cmd_gen_workload(gen_opts, gen_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const WorkloadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
