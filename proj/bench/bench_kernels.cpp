// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <memory>

#include "fanns/exact_oracle.h"
#include "fanns/harness.h"
#include "fanns/label_filter.h"
#include "fanns/quantization.h"
#include "fanns/strategies.h"
#include "fanns/workload.h"

using namespace fanns;

namespace {

constexpr std::size_t kDim = 32;

const std::shared_ptr<const Dataset>& base() {
    static const auto data = std::make_shared<const Dataset>(
            kDim, gen_clustered_vectors(20000, kDim, 16, 1), gen_skewed_labels(20000, 32, 2));
    return data;
}

const std::vector<FilteredQuery>& queries() {
    static const auto qs = [] {
        const auto vecs = gen_clustered_vectors(200, kDim, 16, 3);
        std::vector<FilteredQuery> out(200);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].embedding.assign(vecs.begin() + std::ptrdiff_t(i * kDim), vecs.begin() + std::ptrdiff_t((i + 1) * kDim));
            out[i].labels = base()->labels(i * 97);
            out[i].constraint = Constraint::Overlap;
            out[i].k = 10;
        }
        return out;
    }();
    return qs;
}

void BM_ExactKnn(benchmark::State& state) {
    const InvertedLabelIndex index(base()->all_labels());
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_knn_batch(*base(), index, queries(), 10, Metric::SquaredEuclidean,
                                                 int(state.range(0))));
    }
}

void BM_ExactKnnSerial(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_knn_batch_serial(*base(), queries(), 10, Metric::SquaredEuclidean));
    }
}

const KMeansModel& model() {
    static const KMeansModel m = [] {
        KMeansParams p;
        p.k = 256;
        p.max_iterations = 5;
        return kmeans(base()->values(), kDim, p);
    }();
    return m;
}

void BM_AssignNearest(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(assign_nearest(model(), base()->values(), int(state.range(0))));
    }
}

void BM_AssignNearestSerial(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(assign_nearest_serial(model(), base()->values()));
    }
}

const PQCodebook& codebook() {
    static const PQCodebook pq = PQCodebook::train(base()->values(), kDim, 8, 4);
    return pq;
}

void BM_PqEncode(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(codebook().encode_batch(base()->values(), int(state.range(0))));
    }
}

void BM_PqEncodeSerial(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(codebook().encode_batch_serial(base()->values()));
    }
}

const StrategyIndex& acorn() {
    static const auto index = build_index(Algorithm::AcornGamma, base(), {});
    return *index;
}

void BM_SearchBatch(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(search_batch(acorn(), queries(), 64, 10, int(state.range(0))));
    }
}

void BM_SearchBatchSerial(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(search_batch_serial(acorn(), queries(), 64, 10));
    }
}

}  // namespace

BENCHMARK(BM_ExactKnn)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactKnnSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignNearest)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignNearestSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PqEncode)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PqEncodeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SearchBatch)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SearchBatchSerial)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
    // fixtures are built up front so no timing includes them
    (void)queries();
    (void)model();
    (void)codebook();
    (void)acorn();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) {
        return 1;
    }
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
