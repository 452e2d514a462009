#include <random>

#include <benchmark/benchmark.h>

#include "conolink/assignment.hpp"
#include "conolink/pipeline.hpp"

namespace conolink {
namespace {

void BM_Hungarian(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = unit(rng);
    for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 256)->Complexity();

DetectionSet scene(int objects, int frames, std::size_t dim = kDefaultEmbeddingDim) {
    ScenarioSpec spec;
    spec.n_objects = objects;
    spec.n_frames = frames;
    spec.seed = 7;
    spec.embedding_dim = dim;
    spec.embedding_noise_sigma = 0.1;
    spec.miss_rate = 0.05;
    return synthesize(spec);
}

void BM_AccumulateAffinity(benchmark::State& state) {
    const DetectionSet set = scene(static_cast<int>(state.range(0)), 512);
    for (auto _ : state) benchmark::DoNotOptimize(accumulate_affinity(set, WindowPlan{}, CosineScorer{}));
    state.counters["detections"] = static_cast<double>(set.size());
}
BENCHMARK(BM_AccumulateAffinity)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

TrackGraph part_graph(const DetectionSet& set) {
    const TrackerConfig cfg;
    const AffinityMatrix m = accumulate_affinity(set, cfg.window, CosineScorer{});
    TrackGraph g = build_part_graph(associate_frames(set, m, cfg.builder), set, cfg.builder.lookback);
    label_edges(g);
    return g;
}

void BM_MpnForward(benchmark::State& state) {
    MpnConfig cfg;
    cfg.embed_dim = 16;
    cfg.steps = static_cast<std::size_t>(state.range(0));
    const MpnParams params = MpnParams::initialize(cfg, 1);
    const GraphTensors g = GraphTensors::from(part_graph(scene(10, 64, 16)));
    for (auto _ : state) benchmark::DoNotOptimize(forward(g, params));
    state.counters["edges"] = static_cast<double>(g.edge_count());
}
BENCHMARK(BM_MpnForward)->Arg(3)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_MpnBackward(benchmark::State& state) {
    MpnConfig cfg;
    cfg.embed_dim = 16;
    cfg.steps = static_cast<std::size_t>(state.range(0));
    const MpnParams params = MpnParams::initialize(cfg, 1);
    const GraphTensors g = GraphTensors::from(part_graph(scene(10, 64, 16)));
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(g, params));
    state.counters["edges"] = static_cast<double>(g.edge_count());
}
BENCHMARK(BM_MpnBackward)->Arg(3)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_GreedyRound(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RoundingProblem p;
    p.node_count = static_cast<std::size_t>(state.range(0));
    std::uniform_int_distribution<std::size_t> pick(0, p.node_count - 1);
    while (p.edges.size() < 6 * p.node_count) {
        std::size_t a = pick(rng), b = pick(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        p.edges.push_back({a, b, unit(rng)});
    }
    for (auto _ : state) benchmark::DoNotOptimize(greedy_round(p, 0.5));
}
BENCHMARK(BM_GreedyRound)->RangeMultiplier(4)->Range(64, 16384);

void BM_TrackClip(benchmark::State& state) {
    const DetectionSet set = scene(static_cast<int>(state.range(0)), 512);
    const TrackerConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(track_clip(set, cfg, CosineScorer{}, HandcraftedEdgeScorer{}));
}
BENCHMARK(BM_TrackClip)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace conolink

BENCHMARK_MAIN();
