#pragma once

// Concrete strategy indexes. Most callers only need strategy.h; the types
// here expose internals for audits and tests.

#include <optional>

#include "fanns/graph.h"
#include "fanns/quantization.h"
#include "fanns/strategy.h"

namespace fanns {

class BruteForceIndex final : public StrategyIndex {
public:
    BruteForceIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params);

    Algorithm algorithm() const override { return Algorithm::BruteForce; }
    bool uses_bitmap() const override { return true; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    std::string_view knob_name() const override { return "none"; }
    std::vector<std::uint32_t> default_sweep() const override { return {0}; }
    void save_payload(BinaryWriter&) const override {}
};

/// Unfiltered layered graph; results are checked against the bitmap and
/// the beam width doubles until k valid results are found or the cap
/// (param l_max, 0 = n) has been tried.
class PostFilterHnswIndex final : public StrategyIndex {
public:
    PostFilterHnswIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                        std::uint64_t seed, int threads);
    PostFilterHnswIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                        ProximityGraph graph);

    Algorithm algorithm() const override { return Algorithm::PostFilterHnsw; }
    bool uses_bitmap() const override { return true; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    void save_payload(BinaryWriter& out) const override;

    const ProximityGraph& graph() const { return graph_; }

private:
    ProximityGraph graph_;
};

/// IVF-PQ scan of the nprobe nearest lists; ADC candidates are checked
/// against the bitmap and the best rerank*k survivors (all of them with
/// full_rerank) are re-ranked at full precision. nprobe doubles until k
/// valid candidates are found or every list was scanned.
class PostFilterIvfPqIndex final : public StrategyIndex {
public:
    PostFilterIvfPqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                         std::uint64_t seed, int threads);
    PostFilterIvfPqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                         IvfPqIndex ivf);

    Algorithm algorithm() const override { return Algorithm::PostFilterIvfPq; }
    bool uses_bitmap() const override { return true; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    std::string_view knob_name() const override { return "nprobe"; }
    std::vector<std::uint32_t> default_sweep() const override;
    void save_payload(BinaryWriter& out) const override;

    const IvfPqIndex& ivf() const { return ivf_; }

private:
    IvfPqIndex ivf_;
};

/// Label-agnostic layered graph searched under the bitmap. ACORN-gamma
/// keeps gamma*M layer-0 neighbors and expands one hop; ACORN-1 keeps 2M
/// and expands two hops. Below selectivity min_selectivity (default 1/gamma
/// for ACORN-gamma, 1/M for ACORN-1) the bitmap is scanned exactly.
class AcornIndex final : public StrategyIndex {
public:
    AcornIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
               std::uint64_t seed, int threads);
    AcornIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
               ProximityGraph graph);

    Algorithm algorithm() const override { return variant_; }
    bool uses_bitmap() const override { return true; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    void save_payload(BinaryWriter& out) const override;

    const ProximityGraph& graph() const { return graph_; }
    /// Layered-builder settings for a variant and its parameters.
    static LayeredParams layered_params(Algorithm variant, const ParamMap& params, std::uint64_t seed, int threads);

    /// Overrides the hop mode (tests compare one- and two-hop search).
    SearchOutput search_with(const FilteredQuery& query, std::uint32_t l, const FilterBitmap& bitmap, HopMode mode) const;

private:
    Algorithm variant_;
    ProximityGraph graph_;
};

/// Groups of identical label sets with their minimal containment DAG.
struct LabelNavGraph {
    std::vector<LabelSet> sets;              // sorted ascending
    std::vector<std::vector<idx_t>> members; // per group, ascending ids
    std::vector<std::vector<std::uint32_t>> children;  // minimal supersets
    std::vector<std::vector<std::uint32_t>> parents;   // minimal subsets

    std::optional<std::uint32_t> find(const LabelSet& s) const;
    std::size_t edge_count() const;
};

LabelNavGraph group_by_label_set(std::span<const LabelSet> labels);
/// Fills children/parents with minimal containment edges.
void build_lng(LabelNavGraph& lng);

class UngIndex final : public StrategyIndex {
public:
    UngIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed);
    UngIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, Adjacency adjacency,
             std::vector<idx_t> group_entries);

    Algorithm algorithm() const override { return Algorithm::Ung; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    void save_payload(BinaryWriter& out) const override;

    const LabelNavGraph& lng() const { return lng_; }
    const Adjacency& adjacency() const { return adjacency_; }
    idx_t group_entry(std::uint32_t group) const { return group_entries_[group]; }
    std::size_t cross_edge_count() const;

    /// Groups whose label sets are the minimal supersets of `labels`.
    std::vector<std::uint32_t> entry_groups(const LabelSet& labels) const;

private:
    std::vector<Neighbor> traverse(std::span<const float> query, std::span<const std::uint32_t> groups,
                                   std::uint32_t l, SearchOutput& out, bool restrict_to_group) const;

    LabelNavGraph lng_;
    std::vector<std::uint32_t> group_of_;
    Adjacency adjacency_;              // global ids
    std::vector<idx_t> group_entries_; // per group, global id of its medoid
};

/// One per-label Vamana subgraph of a stitched build.
struct LabelSubgraph {
    label_t label = 0;
    std::vector<idx_t> members;  // global ids
    Adjacency adjacency;         // parallel to members, global ids
};

/// Filtered-Vamana and Stitched-Vamana share the search path: start at the
/// query labels' start points, expand nodes overlapping the query labels,
/// admit results that pass the full constraint.
class LabelVamanaIndex final : public StrategyIndex {
public:
    LabelVamanaIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                     std::uint64_t seed);
    LabelVamanaIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                     Adjacency adjacency, std::vector<idx_t> start_points);

    Algorithm algorithm() const override { return variant_; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    void save_payload(BinaryWriter& out) const override;

    const Adjacency& adjacency() const { return adjacency_; }
    /// Start point per label id (kNoStart where the label has no records).
    const std::vector<idx_t>& start_points() const { return start_points_; }
    /// Per-label subgraphs kept from a stitched build; empty after loading
    /// from disk.
    const std::vector<LabelSubgraph>& label_subgraphs() const { return subgraphs_; }

    static constexpr idx_t kNoStart = ~idx_t{0};

private:
    void build_filtered(std::uint64_t seed);
    void build_stitched(std::uint64_t seed);

    Algorithm variant_;
    Adjacency adjacency_;
    std::vector<idx_t> start_points_;
    std::vector<LabelSubgraph> subgraphs_;
};

/// Fused distance over fixed-length label vectors: delta + lambda * Hamming.
struct FusedMetric {
    Metric base = Metric::SquaredEuclidean;
    float lambda = 0.0f;
    std::size_t label_length = 0;

    /// Positions where the offset-encoded label vectors differ.
    std::size_t hamming(const LabelSet& a, const LabelSet& b) const;
    float operator()(std::span<const float> a, const LabelSet& la, std::span<const float> b, const LabelSet& lb) const;
};

/// Mean pairwise base distance over `pairs` sampled pairs, divided by the
/// label length.
float auto_lambda(const Dataset& data, Metric metric, std::size_t label_length, std::size_t pairs, std::uint64_t seed);

class NhqIndex final : public StrategyIndex {
public:
    NhqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed);
    NhqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, float lambda,
             Adjacency adjacency, std::vector<idx_t> seeds);

    Algorithm algorithm() const override { return Algorithm::Nhq; }
    bool supports(Constraint c) const override { return c == Constraint::FixedLengthEquality; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    void save_payload(BinaryWriter& out) const override;

    const FusedMetric& fused() const { return fused_; }
    const Adjacency& adjacency() const { return adjacency_; }

private:
    FusedMetric fused_;
    Adjacency adjacency_;
    std::vector<idx_t> seeds_;
};

struct CapsSubCluster {
    std::optional<label_t> label;  // nullopt for the remainder
    std::vector<idx_t> members;
};

class CapsIndex final : public StrategyIndex {
public:
    CapsIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed, int threads);
    CapsIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, KMeansModel coarse,
              std::vector<std::vector<CapsSubCluster>> clusters);

    Algorithm algorithm() const override { return Algorithm::Caps; }
    bool supports(Constraint c) const override { return c == Constraint::FixedLengthEquality; }
    SearchOutput search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const override;
    std::string_view knob_name() const override { return "nprobe"; }
    std::vector<std::uint32_t> default_sweep() const override;
    void save_payload(BinaryWriter& out) const override;

    const KMeansModel& coarse() const { return coarse_; }
    /// Sub-clusters of each coarse cluster in creation order.
    const std::vector<std::vector<CapsSubCluster>>& clusters() const { return clusters_; }

private:
    KMeansModel coarse_;
    std::vector<std::vector<CapsSubCluster>> clusters_;
};

}  // namespace fanns
