#pragma once

#include <span>

#include "fanns/core.h"

namespace fanns {

inline float squared_l2(const float* a, const float* b, std::size_t d) {
    float sum = 0.0f;
#pragma omp simd reduction(+ : sum)
    for (std::size_t i = 0; i < d; ++i) {
        const float diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

inline float inner_product(const float* a, const float* b, std::size_t d) {
    float sum = 0.0f;
#pragma omp simd reduction(+ : sum)
    for (std::size_t i = 0; i < d; ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

/// Unchecked kernel for hot loops; callers guarantee equal dimensions.
inline float distance_unchecked(Metric metric, const float* a, const float* b, std::size_t d) {
    return metric == Metric::SquaredEuclidean ? squared_l2(a, b, d) : -inner_product(a, b, d);
}

/// Squared Euclidean distance, or the negated inner product. Throws
/// ParameterError on a dimension mismatch.
float distance(Metric metric, std::span<const float> a, std::span<const float> b);

/// Pulls a stored vector towards the cache ahead of a distance call.
inline void prefetch_vector(const float* p, std::size_t dim) {
    for (std::size_t i = 0; i < dim; i += 64 / sizeof(float)) {
        __builtin_prefetch(p + i);
    }
}

/// Distance from a fixed query to dataset rows.
class QueryDistance {
public:
    QueryDistance(const Dataset& data, std::span<const float> query, Metric metric)
            : data_(&data), query_(query.data()), metric_(metric) {}

    float operator()(idx_t id) const {
        return distance_unchecked(metric_, query_, data_->vector(id).data(), data_->dim());
    }
    void prefetch(idx_t id) const { prefetch_vector(data_->vector(id).data(), data_->dim()); }

private:
    const Dataset* data_;
    const float* query_;
    Metric metric_;
};

}  // namespace fanns
