#pragma once

// Shared test data: the seven-record demo dataset and random generators.

#include <random>
#include <vector>

#include "fanns/core.h"

namespace fanns::testing {

/// Seven records v1..v7 (ids 0..6). Label 1 is carried by v1,v2,v3,v5,v7 and
/// label 2 by v1,v2,v3,v6,v7; only v3 and v7 carry exactly {1,2}; v4 shares
/// no label with {1,2}. Around the origin query, v5 is the unfiltered 1-NN
/// and v3 the nearest record containing {1,2}.
inline Dataset demo_dataset() {
    std::vector<float> values = {
            3.0f, 3.0f,    // v1 {1,2,3}
            -3.0f, 3.0f,   // v2 {1,2,4}
            0.0f, -2.0f,   // v3 {1,2}
            0.0f, 1.5f,    // v4 {3}
            1.0f, 0.0f,    // v5 {1}
            -1.6f, 0.0f,   // v6 {2}
            3.0f, 0.0f,    // v7 {1,2}
    };
    std::vector<LabelSet> labels = {{1, 2, 3}, {1, 2, 4}, {1, 2}, {3}, {1}, {2}, {1, 2}};
    return Dataset(2, std::move(values), std::move(labels));
}

inline FilteredQuery demo_query(Constraint c, std::uint32_t k = 1) {
    return FilteredQuery{{0.0f, 0.0f}, LabelSet{1, 2}, k, c};
}

inline LabelSet random_label_set(std::mt19937_64& rng, std::size_t universe, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<label_t> label(0, label_t(universe - 1));
    std::vector<label_t> raw;
    const std::size_t l = len(rng);
    for (std::size_t i = 0; i < l; ++i) {
        raw.push_back(label(rng));
    }
    return LabelSet::from_unsorted(std::move(raw));
}

/// Fixed-length label set: `length` positions, `values` choices each, encoded
/// as position * values + value.
inline LabelSet random_fixed_label_set(std::mt19937_64& rng, std::size_t length, std::size_t values) {
    std::uniform_int_distribution<label_t> pick(0, label_t(values - 1));
    std::vector<label_t> raw;
    for (std::size_t p = 0; p < length; ++p) {
        raw.push_back(label_t(p * values) + pick(rng));
    }
    return LabelSet::from_unsorted(std::move(raw));
}

inline std::vector<float> random_vectors(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> v(n * dim);
    for (float& x : v) {
        x = g(rng);
    }
    return v;
}

/// Gaussian blobs: `clusters` centers, unit-variance points around them.
inline std::vector<float> clustered_vectors(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t clusters) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> centers(clusters * dim);
    for (float& x : centers) {
        x = 4.0f * g(rng);
    }
    std::uniform_int_distribution<std::size_t> which(0, clusters - 1);
    std::vector<float> v(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = which(rng);
        for (std::size_t j = 0; j < dim; ++j) {
            v[i * dim + j] = centers[c * dim + j] + g(rng);
        }
    }
    return v;
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t universe, std::size_t max_len) {
    std::vector<LabelSet> labels;
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(random_label_set(rng, universe, max_len));
    }
    return Dataset(dim, random_vectors(rng, n, dim), std::move(labels));
}

}  // namespace fanns::testing
