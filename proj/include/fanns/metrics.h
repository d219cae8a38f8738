#pragma once

#include <span>

#include "fanns/core.h"

namespace fanns {

/// Recall@k of `result` against `truth`.
///
/// Hits are counted among the first k returned ids. A returned id is correct
/// if it is among the first k truth ids, or if it appears deeper in the truth
/// list at exactly the k-th truth distance (distance ties all count). The
/// denominator is min(k, |truth|). Throws ParameterError on empty truth or
/// k == 0.
double recall_at_k(std::span<const idx_t> result, const GroundTruth& truth, std::size_t k);

/// Fraction of `base_labels` satisfying `constraint` against `query`.
double selectivity(std::span<const LabelSet> base_labels, const LabelSet& query, Constraint constraint);

}  // namespace fanns
