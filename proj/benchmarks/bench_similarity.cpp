#include <benchmark/benchmark.h>

#include <random>

#include "cfw/cfsim.hpp"
#include "cfw/weighting.hpp"

using namespace cfw;

namespace {

InteractionMatrix random_urm(Index rows, Index cols, double density,
                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Entry> entries;
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c)
            if (coin(rng) < density) entries.push_back({r, c, 1.0 + double(rng() % 5)});
    return InteractionMatrix(rows, cols, std::move(entries));
}

FeatureMatrix random_icm(Index items, Index feats, int per_item,
                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Entry> entries;
    for (Index i = 0; i < items; ++i)
        for (int t = 0; t < per_item; ++t) {
            Index f = Index((rng() + t * 131) % std::uint64_t(feats));
            bool dup = false;
            for (int s = 0; s < t; ++s)
                if (entries[entries.size() - 1 - s].col == f) dup = true;
            if (!dup) entries.push_back({i, f, 1.0});
        }
    return FeatureMatrix(items, feats, std::move(entries));
}

void bm_knn_cosine(benchmark::State& state) {
    auto urm = random_urm(Index(state.range(0)), Index(state.range(1)), 0.05, 1);
    KnnConfig cfg;
    cfg.k = 100;
    for (auto _ : state) benchmark::DoNotOptimize(knn_similarity(urm, cfg));
}
BENCHMARK(bm_knn_cosine)->Args({500, 300})->Args({2000, 500});

void bm_p3alpha(benchmark::State& state) {
    auto urm = random_urm(Index(state.range(0)), Index(state.range(1)), 0.05, 2);
    GraphConfig cfg;
    cfg.alpha = 0.8;
    cfg.k = 100;
    for (auto _ : state) benchmark::DoNotOptimize(p3alpha(urm, cfg));
}
BENCHMARK(bm_p3alpha)->Args({500, 300})->Args({2000, 500});

void bm_prune_topk(benchmark::State& state) {
    auto urm = random_urm(Index(state.range(0)), Index(state.range(0)), 0.2, 3);
    std::vector<Entry> entries;
    for (const auto& e : urm.entries())
        if (e.row != e.col) entries.push_back(e);
    SimilarityMatrix s(Index(state.range(0)), std::move(entries));
    for (auto _ : state) benchmark::DoNotOptimize(prune_topk(s, 50));
}
BENCHMARK(bm_prune_topk)->Arg(500)->Arg(1000);

void bm_weighted_similarity(benchmark::State& state) {
    auto icm = random_icm(Index(state.range(0)), 200, 4, 4);
    auto w = init_weights(200, 5, 7);
    for (auto _ : state)
        benchmark::DoNotOptimize(weighted_content_similarity(icm, w, 100));
}
BENCHMARK(bm_weighted_similarity)->Arg(300)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
