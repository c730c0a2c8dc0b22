#include <benchmark/benchmark.h>

#include "etlsched/workload.hpp"

using namespace etlsched;

static void BM_GenerateDag200(benchmark::State& state) {
    WorkloadConfig cfg;
    cfg.n_tasks = 200;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        benchmark::DoNotOptimize(generate_dag(cfg));
    }
}
BENCHMARK(BM_GenerateDag200);

static void BM_TopologicalOrder(benchmark::State& state) {
    WorkloadConfig cfg;
    cfg.n_tasks = static_cast<int>(state.range(0));
    cfg.layer_widths = {2, 1, 1, 1, 1};
    const TaskDag dag = generate_dag(cfg);
    for (auto _ : state) benchmark::DoNotOptimize(topological_order(dag));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopologicalOrder)->Arg(200)->Arg(1000);
