#include "fanns/exact_oracle.h"

#include <algorithm>
#include <queue>

#include <omp.h>

#include "fanns/distance.h"

namespace fanns {

std::vector<idx_t> OracleResult::ids() const {
    std::vector<idx_t> out;
    out.reserve(neighbors.size());
    for (const auto& nb : neighbors) {
        out.push_back(nb.id);
    }
    return out;
}

GroundTruth OracleResult::to_ground_truth() const {
    GroundTruth gt;
    for (const auto& nb : neighbors) {
        gt.ids.push_back(nb.id);
        gt.distances.push_back(nb.distance);
    }
    return gt;
}

OracleResult exact_knn_in_bitmap(const Dataset& dataset,
                                 const FilterBitmap& filter,
                                 std::span<const float> query,
                                 std::size_t k,
                                 Metric metric) {
    if (query.size() != dataset.dim()) {
        throw ParameterError("query dimension " + std::to_string(query.size()) +
                             " does not match dataset dimension " + std::to_string(dataset.dim()));
    }
    OracleResult out;
    out.satisfied_count = filter.count();
    if (k == 0) {
        return out;
    }
    auto cmp = [](const Neighbor& a, const Neighbor& b) { return closer(a, b); };
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(cmp)> heap(cmp);
    const QueryDistance dist(dataset, query, metric);
    for (idx_t id : filter) {
        Neighbor nb{id, dist(id)};
        if (heap.size() < k) {
            heap.push(nb);
        } else if (closer(nb, heap.top())) {
            heap.pop();
            heap.push(nb);
        }
    }
    out.neighbors.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out.neighbors[i] = heap.top();
        heap.pop();
    }
    return out;
}

OracleResult exact_filtered_knn(const Dataset& dataset,
                                const InvertedLabelIndex& index,
                                const FilteredQuery& query,
                                Metric metric) {
    check_constraint(dataset, query.labels, query.constraint);
    const FilterBitmap filter = filter_map(index, query.labels, query.constraint, dataset.all_labels());
    return exact_knn_in_bitmap(dataset, filter, query.embedding, query.k, metric);
}

std::vector<OracleResult> exact_knn_batch(const Dataset& dataset,
                                          const InvertedLabelIndex& index,
                                          std::span<const FilteredQuery> queries,
                                          std::size_t depth,
                                          Metric metric,
                                          int threads) {
    for (const auto& q : queries) {
        check_constraint(dataset, q.labels, q.constraint);
    }
    std::vector<OracleResult> out(queries.size());
    const auto count = static_cast<std::int64_t>(queries.size());
    const int workers = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(workers)
    for (std::int64_t i = 0; i < count; ++i) {
        const auto& q = queries[std::size_t(i)];
        const FilterBitmap filter = filter_map(index, q.labels, q.constraint, dataset.all_labels());
        out[std::size_t(i)] = exact_knn_in_bitmap(dataset, filter, q.embedding, depth, metric);
    }
    return out;
}

std::vector<OracleResult> exact_knn_batch_serial(const Dataset& dataset,
                                                 std::span<const FilteredQuery> queries,
                                                 std::size_t depth,
                                                 Metric metric) {
    std::vector<OracleResult> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        check_constraint(dataset, q.labels, q.constraint);
        const FilterBitmap filter = filter_map_scan(dataset.all_labels(), q.labels, q.constraint);
        out.push_back(exact_knn_in_bitmap(dataset, filter, q.embedding, depth, metric));
    }
    return out;
}

}  // namespace fanns
