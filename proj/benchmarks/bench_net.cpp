#include <benchmark/benchmark.h>

#include "etlsched/net.hpp"
#include "etlsched/rng.hpp"

using namespace etlsched;

namespace {

std::vector<TrainSample> make_batch(int n, int dim, int actions, Rng& rng) {
    std::vector<TrainSample> batch(n);
    for (TrainSample& s : batch) {
        s.s.resize(dim);
        for (double& v : s.s) v = rng.uniform();
        s.a = rng.uniform_int(actions);
        s.y = rng.uniform(-1.0, 1.0);
    }
    return batch;
}

} // namespace

static void BM_QValues(benchmark::State& state) {
    const QNetwork net = QNetwork::init(44, 64, 32, 9, 1);
    Rng rng(2);
    std::vector<double> s(44);
    for (double& v : s) v = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(q_values(s, net));
}
BENCHMARK(BM_QValues);

// one full gradient step at the default batch size
static void BM_TrainStep(benchmark::State& state) {
    QNetwork net = QNetwork::init(44, 64, 32, 9, 1);
    AdamState opt = AdamState::init(net, 5e-4);
    Rng rng(3);
    const std::vector<TrainSample> batch = make_batch(64, 44, 9, rng);
    Gradients g;
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(batch, net, g));
        optimizer_step(net, g, opt);
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMicrosecond);

static void BM_GradCheckSmall(benchmark::State& state) {
    const QNetwork net = QNetwork::init(6, 8, 5, 3, 7);
    Rng rng(4);
    const std::vector<TrainSample> batch = make_batch(4, 6, 3, rng);
    for (auto _ : state) benchmark::DoNotOptimize(grad_check(net, batch, 1e-6));
}
BENCHMARK(BM_GradCheckSmall)->Unit(benchmark::kMillisecond);
