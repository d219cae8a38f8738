#pragma once

// Domain model shared by every index and tool: records, label sets, filter
// constraints, queries and ground truth.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fanns {

using idx_t = std::uint32_t;
using label_t = std::uint32_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct ConstraintError : Error {
    using Error::Error;
};
struct UnsupportedError : Error {
    using Error::Error;
};

/// Sorted, duplicate-free set of dense label ids.
class LabelSet {
public:
    LabelSet() = default;
    LabelSet(std::initializer_list<label_t> labels);
    /// Sorts and deduplicates.
    static LabelSet from_unsorted(std::vector<label_t> labels);

    std::span<const label_t> labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    bool contains(label_t label) const;
    auto begin() const { return labels_.begin(); }
    auto end() const { return labels_.end(); }

    /// this ⊆ other
    bool is_subset_of(const LabelSet& other) const;
    bool intersects(const LabelSet& other) const;

    std::string to_string() const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
    friend auto operator<=>(const LabelSet&, const LabelSet&) = default;

private:
    std::vector<label_t> labels_;
};

enum class Constraint : std::uint8_t {
    Containment,
    Overlap,
    Equality,
    FixedLengthEquality,
};

std::string_view to_string(Constraint c);
Constraint parse_constraint(std::string_view name);
inline constexpr Constraint kAllConstraints[] = {
        Constraint::Containment,
        Constraint::Overlap,
        Constraint::Equality,
        Constraint::FixedLengthEquality};

enum class Metric : std::uint8_t {
    SquaredEuclidean,
    InnerProduct,
};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

/// Row-major n x d float matrix plus one label set per row. Record ids are
/// the row numbers.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t dim, std::vector<float> values, std::vector<LabelSet> labels);

    std::size_t size() const { return labels_.size(); }
    std::size_t dim() const { return dim_; }
    bool empty() const { return labels_.empty(); }

    std::span<const float> vector(idx_t id) const {
        return {values_.data() + std::size_t(id) * dim_, dim_};
    }
    const LabelSet& labels(idx_t id) const { return labels_[id]; }
    std::span<const LabelSet> all_labels() const { return labels_; }
    std::span<const float> values() const { return values_; }

    /// Number of distinct label ids, i.e. max label + 1.
    std::size_t label_universe() const { return universe_; }
    /// Common label-set length when every record shares one, else nullopt.
    std::optional<std::size_t> fixed_label_length() const { return fixed_length_; }

    /// Rows selected by `ids`, renumbered densely in the given order.
    Dataset subset(std::span<const idx_t> ids) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
    std::vector<LabelSet> labels_;
    std::optional<std::size_t> fixed_length_;
    std::size_t universe_ = 0;
};

struct FilteredQuery {
    std::vector<float> embedding;
    LabelSet labels;
    std::uint32_t k = 10;
    Constraint constraint = Constraint::Containment;
};

struct Neighbor {
    idx_t id = 0;
    float distance = 0.0f;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Total order used everywhere results are ranked: distance, then id.
inline bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

struct GroundTruth {
    std::vector<idx_t> ids;
    std::vector<float> distances;

    std::size_t size() const { return ids.size(); }
    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Truth of `base |_S query` for one record.
///
/// FixedLengthEquality additionally requires both sets to have the same
/// length; a mismatch means the dataset context is not fixed-length and is
/// reported as a ConstraintError.
bool satisfies(const LabelSet& base, const LabelSet& query, Constraint constraint);

/// Throws ConstraintError if `constraint` cannot be evaluated over `dataset`
/// with `query` (FixedLengthEquality over mixed lengths).
void check_constraint(const Dataset& dataset, const LabelSet& query, Constraint constraint);

}  // namespace fanns
