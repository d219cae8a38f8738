#pragma once

// Dataset ingestion, synthetic data, query stratification and ground truth.
//
// Ground-truth binary layout (little-endian), one block per query:
//   i32 count, then count x (i32 id, f32 distance)

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fanns/core.h"

namespace fanns {

struct Matrix {
    std::size_t dim = 0;
    std::vector<float> values;

    std::size_t rows() const { return dim ? values.size() / dim : 0; }
    std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Per vector: i32 dimension, then that many f32 values.
Matrix load_fvecs(const std::filesystem::path& path);
void save_fvecs(const std::filesystem::path& path, const Matrix& m);

/// Raw label ids (as written in files) to dense ids, assigned in ascending
/// raw order.
class LabelMapping {
public:
    LabelMapping() = default;
    explicit LabelMapping(std::vector<std::int64_t> raw_of_dense);

    std::size_t size() const { return raw_.size(); }
    const std::vector<std::int64_t>& raw_ids() const { return raw_; }
    /// Unknown raw ids map to fresh ids past the known universe, so they
    /// never match a record.
    LabelSet to_dense(const std::vector<std::int64_t>& raw) const;
    std::vector<std::int64_t> to_raw(const LabelSet& dense) const;

    static LabelMapping identity(std::size_t universe);
    void save(const std::filesystem::path& path) const;
    static LabelMapping load(const std::filesystem::path& path);
    friend bool operator==(const LabelMapping& a, const LabelMapping& b) { return a.raw_ == b.raw_; }

private:
    std::vector<std::int64_t> raw_;
    std::unordered_map<std::int64_t, label_t> dense_;
};

/// Line i holds the comma-separated raw label ids of record i.
std::vector<std::vector<std::int64_t>> read_raw_labels(const std::filesystem::path& path);
void write_raw_labels(const std::filesystem::path& path, const std::vector<std::vector<std::int64_t>>& labels);

struct LabelFile {
    std::vector<LabelSet> sets;  // dense ids
    LabelMapping mapping;
};

/// Reads a labels file and remaps its ids densely.
LabelFile load_labels(const std::filesystem::path& path);
/// Writes dense sets as raw ids plus the mapping beside them (path + ".map").
void save_labels(const std::filesystem::path& path, const std::vector<LabelSet>& sets, const LabelMapping& mapping);

/// fvecs + labels file pair -> dataset (the labels' mapping returned too).
Dataset load_dataset_files(const std::filesystem::path& fvecs, const std::filesystem::path& labels,
                           LabelMapping* mapping = nullptr);

/// Gaussian blobs: centres ~ N(0, 1.5^2), points ~ centre + N(0, 1).
std::vector<float> gen_clustered_vectors(std::size_t n, std::size_t dim, std::size_t clusters, std::uint64_t seed);

/// Position p with value v becomes label p * values + v.
LabelSet encode_fixed_length(std::span<const std::uint32_t> positional, std::size_t values_per_position);
std::vector<std::uint32_t> decode_fixed_length(const LabelSet& labels, std::size_t values_per_position);

/// i.i.d. uniform values per position, offset encoded.
std::vector<LabelSet> gen_fixed_length_labels(std::size_t n, std::size_t length, std::size_t values_per_position,
                                              std::uint64_t seed);

/// Skewed multi-label sets: a Zipf-distributed primary label, a second
/// label with probability 0.3 and a third with probability 0.1.
std::vector<LabelSet> gen_skewed_labels(std::size_t n, std::size_t universe, std::uint64_t seed);

struct QuerySeeds {
    std::vector<LabelSet> labels;
    std::vector<std::string> strata;
    std::vector<std::string> warnings;
};

/// Query label sets sampled from base records, bucketed into length
/// terciles ("short", "medium", "long"). An empty bucket reuses the
/// nearest shorter one and records a warning.
QuerySeeds stratify_by_length(std::span<const LabelSet> base, Constraint scenario, std::size_t per_group,
                              std::uint64_t seed, std::size_t groups = 3);

/// Candidate query label sets for a scenario: distinct base sets, plus
/// single labels and label pairs drawn from base sets for Containment and
/// Overlap.
std::vector<LabelSet> candidate_label_sets(std::span<const LabelSet> base, Constraint scenario);

/// Candidates bucketed around percentiles of their selectivity; buckets
/// are disjoint, per_group sampled with replacement from each.
QuerySeeds stratify_by_selectivity(std::span<const LabelSet> base, Constraint scenario,
                                   std::span<const double> percentiles, std::size_t per_group, std::uint64_t seed);

/// `count` query label sets whose selectivity is nearest `target`.
QuerySeeds queries_near_selectivity(std::span<const LabelSet> base, Constraint scenario, double target,
                                    std::size_t count, std::uint64_t seed);

struct Workload {
    std::string dataset;
    Constraint scenario = Constraint::Containment;
    std::uint32_t k_max = 100;
    bool guarantee = true;
    std::string stratification = "none";
    std::vector<FilteredQuery> queries;
    std::vector<GroundTruth> truth;
    std::vector<std::size_t> satisfied;
    std::vector<std::string> strata;

    std::size_t size() const { return queries.size(); }
};

/// Computes k_max-deep truth per query. With `guarantee`, queries with
/// fewer than k_max matches are dropped; dropping every query is an error.
void attach_ground_truth(Workload& workload, const Dataset& data, Metric metric, int threads = 0);

/// Splits records into a base dataset and held-out query vectors.
struct HeldOut {
    Dataset base;
    Matrix queries;
    std::vector<LabelSet> query_labels;  // the held-out records' own sets
};
HeldOut hold_out(const Dataset& data, std::size_t count, std::uint64_t seed);

void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);

/// manifest.json + queries.fvecs + queries.labels + gt.bin under `dir`.
/// Query labels are written as raw ids through `mapping`.
void save_workload(const std::filesystem::path& dir, const Workload& workload, const LabelMapping& mapping);
/// Accepts the directory or its manifest path.
Workload load_workload(const std::filesystem::path& path);

}  // namespace fanns
