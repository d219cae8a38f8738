#pragma once

// k-means, product quantization and the IVF-PQ inverted file.
//
// Point sets are row-major float spans with an explicit dimension.

#include <cstdint>
#include <span>
#include <vector>

#include "fanns/core.h"

namespace fanns {

class BinaryWriter;
class BinaryReader;
class FilterBitmap;

struct KMeansModel {
    std::size_t dim = 0;
    std::vector<float> centroids;  // k x dim

    std::size_t k() const { return dim ? centroids.size() / dim : 0; }
    std::span<const float> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }
    /// Nearest centroid under squared L2, ties to the lower index.
    std::uint32_t assign(std::span<const float> x) const;

    void save(BinaryWriter& out) const;
    static KMeansModel load(BinaryReader& in);
    friend bool operator==(const KMeansModel&, const KMeansModel&) = default;
};

struct KMeansParams {
    std::size_t k = 16;
    int max_iterations = 25;
    std::uint64_t seed = 42;
    /// Training uses at most this many points per centroid (0 = all).
    std::size_t max_points_per_centroid = 256;
    int threads = 0;
};

/// Lloyd iterations from k-means++ seeding. Empty clusters are re-seeded
/// from the point farthest from its centroid. If `objective` is non-null it
/// receives the sum of squared distances after every assignment step.
KMeansModel kmeans(std::span<const float> points, std::size_t dim, const KMeansParams& params,
                   std::vector<double>* objective = nullptr);

/// Nearest-centroid assignment for every point.
std::vector<std::uint32_t> assign_nearest(const KMeansModel& model, std::span<const float> points, int threads = 0);
std::vector<std::uint32_t> assign_nearest_serial(const KMeansModel& model, std::span<const float> points);

/// Sum of squared distances of every point to its nearest centroid.
double kmeans_objective(const KMeansModel& model, std::span<const float> points);

class PQCodebook {
public:
    PQCodebook() = default;

    /// Per-subspace k-means with up to 256 centroids (fewer when there are
    /// fewer training points).
    static PQCodebook train(std::span<const float> points, std::size_t dim, std::size_t m, std::uint64_t seed,
                            int threads = 0);

    std::size_t dim() const { return dim_; }
    std::size_t m() const { return m_; }
    std::size_t dsub() const { return m_ ? dim_ / m_ : 0; }
    std::size_t ksub() const { return ksub_; }
    std::span<const float> centroid(std::size_t sub, std::size_t c) const {
        return {centroids_.data() + (sub * ksub_ + c) * dsub(), dsub()};
    }

    void encode(std::span<const float> x, std::uint8_t* code) const;
    std::vector<std::uint8_t> encode_batch(std::span<const float> points, int threads = 0) const;
    std::vector<std::uint8_t> encode_batch_serial(std::span<const float> points) const;
    std::vector<float> decode(const std::uint8_t* code) const;

    /// Lookup table of m x ksub partial distances from `query`.
    std::vector<float> distance_table(std::span<const float> query, Metric metric) const;
    float adc(std::span<const float> table, const std::uint8_t* code) const;

    void save(BinaryWriter& out) const;
    static PQCodebook load(BinaryReader& in);
    friend bool operator==(const PQCodebook&, const PQCodebook&) = default;

private:
    std::size_t dim_ = 0;
    std::size_t m_ = 0;
    std::size_t ksub_ = 0;
    std::vector<float> centroids_;  // m x ksub x dsub
};

/// Asymmetric distance between a raw query and one code.
float adc_distance(const PQCodebook& codebook, std::span<const float> query, const std::uint8_t* code,
                   Metric metric = Metric::SquaredEuclidean);

struct IvfPqParams {
    std::size_t nlist = 64;
    std::size_t m = 8;
    std::uint64_t seed = 42;
    bool residual = true;
    int threads = 0;
};

class IvfPqIndex {
public:
    IvfPqIndex() = default;
    static IvfPqIndex build(const Dataset& data, const IvfPqParams& params, Metric metric);

    std::size_t nlist() const { return lists_.size(); }
    std::size_t size() const { return n_; }
    Metric metric() const { return metric_; }
    bool residual() const { return residual_; }
    const KMeansModel& coarse() const { return coarse_; }
    const PQCodebook& codebook() const { return pq_; }
    const std::vector<idx_t>& list(std::size_t l) const { return lists_[l]; }
    const std::uint8_t* code(idx_t id) const { return codes_.data() + std::size_t(id) * pq_.m(); }

    /// The nprobe lists whose centroids are nearest to `query`.
    std::vector<std::uint32_t> nearest_lists(std::span<const float> query, std::size_t nprobe) const;

    /// ADC distances for every id in `lists` that passes `filter`
    /// (null = no filter), appended to `out`.
    void scan(std::span<const float> query, std::span<const std::uint32_t> lists, const FilterBitmap* filter,
              std::vector<Neighbor>& out) const;

    void save(BinaryWriter& out) const;
    static IvfPqIndex load(BinaryReader& in);
    friend bool operator==(const IvfPqIndex&, const IvfPqIndex&) = default;

private:
    std::size_t n_ = 0;
    Metric metric_ = Metric::SquaredEuclidean;
    bool residual_ = true;
    KMeansModel coarse_;
    PQCodebook pq_;
    std::vector<std::vector<idx_t>> lists_;
    std::vector<std::uint8_t> codes_;
};

}  // namespace fanns
