// Microbenchmarks for the hot paths: the dot kernel, hashed-bag embedding,
// exact top-k search at a few corpus sizes, and answer parsing.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "tqa/corpus.hpp"
#include "tqa/embedder.hpp"
#include "tqa/generation.hpp"
#include "tqa/vectorstore.hpp"

namespace {

tqa::EmbeddingVector random_vector(std::mt19937& rng, std::size_t dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    tqa::EmbeddingVector v(dim);
    for (double& x : v) x = u(rng);
    return v;
}

void BM_Dot(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    std::mt19937 rng(42);
    tqa::EmbeddingVector q = random_vector(rng, dim);
    tqa::EmbeddingVector t = random_vector(rng, dim);
    for (auto _ : state) {
        benchmark::DoNotOptimize(tqa::dot(q, t));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(dim));
}
BENCHMARK(BM_Dot)->Arg(64)->Arg(256)->Arg(1536);

void BM_DeterministicEmbed(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const std::string text =
        "The water cycle moves water between the oceans, the air, and the "
        "land. Evaporation lifts water vapor from the surface, condensation "
        "builds clouds, and precipitation returns the water to the ground.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(tqa::deterministic_embed(text, dim));
    }
    state.SetBytesProcessed(state.iterations() *
                            static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_DeterministicEmbed)->Arg(64)->Arg(256)->Arg(1536);

const tqa::VectorIndex& search_index(std::size_t n) {
    static std::size_t built_n = 0;
    static tqa::VectorIndex index;
    if (built_n != n) {
        std::mt19937 rng(7);
        std::vector<tqa::IndexEntry> entries;
        entries.reserve(n);
        char id[16];
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(id, sizeof id, "T_%06zu", i + 1);
            entries.push_back({id, "L_0001", random_vector(rng, 256)});
        }
        index = tqa::VectorIndex::build(std::move(entries), "bench");
        built_n = n;
    }
    return index;
}

void BM_SearchDot(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const tqa::VectorIndex& index = search_index(n);
    std::mt19937 rng(11);
    tqa::EmbeddingVector q = random_vector(rng, 256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(q, 10, tqa::Metric::Dot));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_SearchDot)->Arg(1000)->Arg(10000);

void BM_SearchCosine(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const tqa::VectorIndex& index = search_index(n);
    std::mt19937 rng(11);
    tqa::EmbeddingVector q = random_vector(rng, 256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(q, 10, tqa::Metric::Cosine));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_SearchCosine)->Arg(1000)->Arg(10000);

void BM_ParseAnswer(benchmark::State& state) {
    tqa::Question q;
    q.question_id = "BENCH_0001";
    q.lesson_id = "L_0001";
    q.kind = tqa::QuestionKind::MultipleChoice;
    q.stem = "Gravity causes erosion by all of the following except";
    q.options = {{"A", "glaciers"},
                 {"B", "moving air"},
                 {"C", "flowing water"},
                 {"D", "Mass movement"}};
    q.gold_label = "B";
    const std::vector<std::string> responses = {
        "(B) moving air",                         // exact label
        "I believe the answer is (B) here.",      // label in text
        "the moving air carries the sediment",    // text match
        "hard to say without more information",   // unparsable
    };
    tqa::ModelResponse resp;
    std::size_t i = 0;
    for (auto _ : state) {
        resp.text = responses[i++ % responses.size()];
        benchmark::DoNotOptimize(tqa::parse_answer(resp, q));
    }
}
BENCHMARK(BM_ParseAnswer);

} // namespace

BENCHMARK_MAIN();
