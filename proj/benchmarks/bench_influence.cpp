#include <benchmark/benchmark.h>

#include "dropkit/influence.hpp"
#include "dropkit/io.hpp"
#include "dropkit/trainer.hpp"

using namespace dropkit;

namespace {

struct Fixture {
    ModelSpec spec;
    Dataset train;
    Dataset val;
    ParamVector params;
};

Fixture make(const ModelSpec& spec, std::size_t n, std::size_t k) {
    BlobsParams bp;
    bp.n = n + k;
    bp.input_dim = spec.input_dim;
    bp.classes = std::max<std::size_t>(2, spec.output_dim);
    bp.flip_fraction = 0.1;
    bp.seed = 7;
    const Dataset all = synth_blobs(bp).dataset;
    std::vector<std::size_t> a(n), b(k);
    for (std::size_t i = 0; i < n; ++i) a[i] = i;
    for (std::size_t i = 0; i < k; ++i) b[i] = n + i;
    Fixture f{spec, all.subset(a), all.subset(b), {}};
    TrainConfig tc;
    tc.epochs = 5;
    f.params = train(spec, f.train, tc);
    return f;
}

ModelSpec spec_for(int which) {
    return which == 0 ? ModelSpec::softmax(20, 5, 0.01) : ModelSpec::mlp(20, 32, 5, Activation::tanh, 0.01);
}

void BM_Hvp(benchmark::State& state) {
    const auto f = make(spec_for(static_cast<int>(state.range(0))), static_cast<std::size_t>(state.range(1)), 1);
    const ParamVector v = ParamVector::Ones(f.params.size());
    for (auto _ : state) benchmark::DoNotOptimize(hvp(f.spec, f.params, f.train, v, 0.01));
    state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Hvp)->ArgsProduct({{0, 1}, {1000, 10000}});

void BM_CgSolve(benchmark::State& state) {
    const auto f = make(spec_for(static_cast<int>(state.range(0))), 2000, 1);
    const ParamVector v = grad(f.spec, f.params, f.val[0]);
    IhvpConfig cfg;
    // the barely trained MLP has negative curvature directions
    if (f.spec.kind == ModelKind::mlp) cfg.damping = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(solve_ihvp(f.spec, f.params, f.train, v, cfg));
}
BENCHMARK(BM_CgSolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_LissaSolve(benchmark::State& state) {
    const auto f = make(spec_for(0), 2000, 1);
    const ParamVector v = grad(f.spec, f.params, f.val[0]);
    IhvpConfig cfg;
    cfg.method = IhvpMethod::lissa;
    for (auto _ : state) benchmark::DoNotOptimize(solve_ihvp(f.spec, f.params, f.train, v, cfg));
}
BENCHMARK(BM_LissaSolve)->Unit(benchmark::kMillisecond);

void BM_ScoreAll(benchmark::State& state) {
    const auto f = make(spec_for(0), 2000, static_cast<std::size_t>(state.range(0)));
    ScoreOptions opts;
    opts.workers = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(score_all(f.spec, f.params, f.train, f.val, {}, opts));
}
BENCHMARK(BM_ScoreAll)->ArgsProduct({{10, 50}, {1, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
BENCHMARK_MAIN();
