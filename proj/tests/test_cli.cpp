// CLI contract tests: exit codes, artifact layout, --help, determinism.
// Drives the real binary as a subprocess.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(ETLSCHED_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CmdResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kTinyArgs =
    "--set workload.n_tasks=20 --set workload.layer_widths=[8,3,3,3,3] "
    "--set cluster.n_nodes=3 --set episodes=2 --set eval_episodes=2 "
    "--set agent.warmup_transitions=16 --set agent.batch_size=8 --seed 11";

} // namespace

TEST_CASE("help lists every subcommand and exits clean") {
    const CmdResult res = run_cli("--help");
    CHECK(res.exit_code == 0);
    for (const char* sub : {"train", "bench", "sweep", "plot", "gen-workload"})
        CHECK(res.output.find(sub) != std::string::npos);

    const CmdResult train_help = run_cli("train --help");
    CHECK(train_help.exit_code == 0);
    for (const char* flag : {"--config", "--seed", "--seeds", "--out", "--jobs", "--set", "--trace"})
        CHECK(train_help.output.find(flag) != std::string::npos);
}

TEST_CASE("missing config file exits 2") {
    const CmdResult res = run_cli("train --config /tmp/etlsched_does_not_exist.json");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("error") != std::string::npos);
}

TEST_CASE("malformed config reports the offending line and exits 2") {
    const std::string path = "/tmp/etlsched_cli_bad.json";
    std::ofstream(path) << "{\n  \"episodes\": 2,\n  broken\n}\n";
    const CmdResult res = run_cli("train --config " + path);
    CHECK(res.exit_code == 2);
    CHECK(res.output.find(":3") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("unknown agents exit 2 and list the valid names") {
    const CmdResult res = run_cli("bench --agents dqn,sac " + kTinyArgs + " --out /tmp/etlsched_cli_x");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("roundrobin") != std::string::npos);
}

TEST_CASE("unwritable output directory exits 2") {
    const std::string file = "/tmp/etlsched_cli_blocker";
    std::ofstream(file) << "x";
    const CmdResult res = run_cli("train " + kTinyArgs + " --out " + file + "/sub");
    CHECK(res.exit_code == 2);
    std::remove(file.c_str());
}

TEST_CASE("train writes the documented artifacts, deterministically") {
    const std::string dir_a = "/tmp/etlsched_cli_train_a";
    const std::string dir_b = "/tmp/etlsched_cli_train_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    const CmdResult a = run_cli("train " + kTinyArgs + " --out " + dir_a);
    REQUIRE(a.exit_code == 0);
    CHECK(fs::exists(fs::path(dir_a) / "reward_curve.csv"));
    CHECK(fs::exists(fs::path(dir_a) / "metrics.json"));
    CHECK(fs::exists(fs::path(dir_a) / "checkpoint_seed11.json"));

    const CmdResult b = run_cli("train " + kTinyArgs + " --out " + dir_b);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(fs::path(dir_a) / "reward_curve.csv") == slurp(fs::path(dir_b) / "reward_curve.csv"));
    CHECK(slurp(fs::path(dir_a) / "metrics.json") == slurp(fs::path(dir_b) / "metrics.json"));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("trace flag dumps JSON Lines event traces") {
    const std::string dir = "/tmp/etlsched_cli_trace";
    fs::remove_all(dir);
    const CmdResult res = run_cli("train " + kTinyArgs + " --trace --out " + dir);
    REQUIRE(res.exit_code == 0);
    const std::string trace = slurp(fs::path(dir) / "trace_seed11.jsonl");
    CHECK(trace.find("\"kind\"") != std::string::npos);
    CHECK(trace.find("\"time\"") != std::string::npos);
    CHECK(trace.find("\"seq\"") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("bench and sweep write comparison and sweep artifacts; plot renders them") {
    const std::string dir = "/tmp/etlsched_cli_bench";
    fs::remove_all(dir);
    const CmdResult bench =
        run_cli("bench --agents random,leastloaded " + kTinyArgs + " --out " + dir);
    REQUIRE(bench.exit_code == 0);
    CHECK(fs::exists(fs::path(dir) / "bench_metrics.csv"));
    CHECK(fs::exists(fs::path(dir) / "comparison.csv"));
    CHECK(fs::exists(fs::path(dir) / "comparison.json"));

    const std::string sdir = "/tmp/etlsched_cli_sweep";
    fs::remove_all(sdir);
    const CmdResult sweep = run_cli("sweep --param nodes --grid 2,3 --agent leastloaded " +
                                    kTinyArgs + " --set eval_episodes=1 --set episodes=1 --out " + sdir);
    REQUIRE(sweep.exit_code == 0);
    const std::string long_csv = slurp(fs::path(sdir) / "sweep.csv");
    CHECK(long_csv.rfind("param,value,seed,asd,status", 0) == 0);

    const CmdResult plot = run_cli("plot --csv " + sdir + "/sweep.csv --out " + sdir + "/chart.svg");
    REQUIRE(plot.exit_code == 0);
    const std::string svg = slurp(fs::path(sdir) / "chart.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);

    // schema mismatch exits 2 naming the missing column
    const std::string bad_csv = "/tmp/etlsched_cli_badsweep.csv";
    std::ofstream(bad_csv) << "value,seed,asd\n1,2,3\n";
    const CmdResult bad = run_cli("plot --csv " + bad_csv + " --out /tmp/etlsched_cli_bad.svg");
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("param") != std::string::npos);
    std::remove(bad_csv.c_str());

    fs::remove_all(dir);
    fs::remove_all(sdir);
}

TEST_CASE("sweep rejects out-of-domain grids with exit 2") {
    const CmdResult res =
        run_cli("sweep --param gamma --grid 0.9,1.0 " + kTinyArgs + " --out /tmp/etlsched_cli_g");
    CHECK(res.exit_code == 2);
}

TEST_CASE("gen-workload emits a DAG document") {
    const std::string out = "/tmp/etlsched_cli_dag.json";
    std::remove(out.c_str());
    const CmdResult res = run_cli("gen-workload --set workload.n_tasks=12 --seed 3 --dag-out " + out);
    REQUIRE(res.exit_code == 0);
    const std::string dag = slurp(out);
    CHECK(dag.find("taskdag-v1") != std::string::npos);
    CHECK(dag.find("\"edges\"") != std::string::npos);
    std::remove(out.c_str());
}
