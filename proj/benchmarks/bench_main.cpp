#include <benchmark/benchmark.h>

#include "hjb/dgm.hpp"
#include "hjb/fdm.hpp"

using namespace hjb;

namespace {

const StateDomain kDomain;

Network bench_net(int n) {
    Network net = Network::init(n, 3, InputScaling::from(kDomain));
    net.output_bias() = 1.0;
    return net;
}

void BM_Forward(benchmark::State& st) {
    const Network net = bench_net(static_cast<int>(st.range(0)));
    double t = 0.3;
    for (auto _ : st) {
        benchmark::DoNotOptimize(net.forward(t, Vec2(0.4, 2.0)));
        t += 1e-9;
    }
}
BENCHMARK(BM_Forward)->Arg(5)->Arg(50);

void BM_Jet(benchmark::State& st) {
    const Network net = bench_net(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(net.jet(0.3, Vec2(0.4, 2.0)));
}
BENCHMARK(BM_Jet)->Arg(5)->Arg(50);

void BM_LossAndGradient(benchmark::State& st) {
    const Model m = HestonModel(ModelParams::calibrated(0.0005));
    Rng rng(1);
    const SampleBatch b = sample_batch(kDomain, static_cast<int>(st.range(0)), 100, rng);
    const auto coeffs = batch_coefficients(m, b.interior);
    const Network net = bench_net(50);
    for (auto _ : st) benchmark::DoNotOptimize(loss_and_gradient(net, b, coeffs, true));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_NewtonLevel(benchmark::State& st) {
    const Grid3D g = Grid3D::from(kDomain, 40, 40, 40);
    const Model m = HestonModel(ModelParams::calibrated(0.0005));
    const auto coeffs = stencil_coefficients(g, m);
    const std::vector<double> unp1(g.level_size(), 1.0);
    NewtonOptions opts;
    opts.rtol = 1e-14;
    for (auto _ : st) {
        std::vector<double> un = unp1;
        benchmark::DoNotOptimize(newton_solve_level(g, coeffs, unp1, un, opts));
    }
}
BENCHMARK(BM_NewtonLevel)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
