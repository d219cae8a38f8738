#pragma once

#include <span>
#include <vector>

#include "fanns/core.h"
#include "fanns/label_filter.h"

namespace fanns {

struct OracleResult {
    std::vector<Neighbor> neighbors;  // ascending by (distance, id)
    std::size_t satisfied_count = 0;

    std::vector<idx_t> ids() const;
    GroundTruth to_ground_truth() const;
};

/// k nearest records among the set bits of `filter`, full precision.
/// Ties are broken by ascending id.
OracleResult exact_knn_in_bitmap(const Dataset& dataset,
                                 const FilterBitmap& filter,
                                 std::span<const float> query,
                                 std::size_t k,
                                 Metric metric);

/// Pre-filter brute force: filter map from the inverted index, then a full
/// scan of the survivors.
OracleResult exact_filtered_knn(const Dataset& dataset,
                                const InvertedLabelIndex& index,
                                const FilteredQuery& query,
                                Metric metric);

/// Ground truth for a query batch, `depth` neighbors each. Runs one query per
/// OpenMP iteration.
std::vector<OracleResult> exact_knn_batch(const Dataset& dataset,
                                          const InvertedLabelIndex& index,
                                          std::span<const FilteredQuery> queries,
                                          std::size_t depth,
                                          Metric metric,
                                          int threads = 0);

/// Single-threaded reference for exact_knn_batch; evaluates satisfies() per
/// record instead of using the inverted index.
std::vector<OracleResult> exact_knn_batch_serial(const Dataset& dataset,
                                                 std::span<const FilteredQuery> queries,
                                                 std::size_t depth,
                                                 Metric metric);

}  // namespace fanns
