#include <benchmark/benchmark.h>

#include "etlsched/env.hpp"
#include "etlsched/rng.hpp"

using namespace etlsched;

// full episodes with a cheap scripted policy; measures simulator + featurization
static void BM_EnvEpisode(benchmark::State& state) {
    WorkloadConfig wl;
    wl.n_tasks = static_cast<int>(state.range(0));
    const ClusterSpec cluster = default_hetero_profile(8, 42);
    SchedulingEnv env(wl, cluster, EnvConfig{});
    Rng rng(7);
    std::uint64_t episode = 0;
    long steps = 0;
    for (auto _ : state) {
        env.reset(episode++);
        while (!env.terminal()) {
            const std::vector<char> legal = env.legal_actions();
            int a = rng.uniform_int(env.action_count());
            if (!legal[a]) a = env.defer_action();
            benchmark::DoNotOptimize(env.step(a));
            ++steps;
        }
    }
    state.SetItemsProcessed(steps);
}
BENCHMARK(BM_EnvEpisode)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
