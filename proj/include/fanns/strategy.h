#pragma once

// Common interface of every filtered search strategy, plus the factory and
// the index-file round trip.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fanns/core.h"
#include "fanns/label_filter.h"

namespace fanns {

class BinaryWriter;
class BinaryReader;

enum class Algorithm : std::uint8_t {
    BruteForce,
    PostFilterHnsw,
    PostFilterIvfPq,
    AcornGamma,
    AcornOne,
    Ung,
    FilteredVamana,
    StitchedVamana,
    Nhq,
    Caps,
};

inline constexpr Algorithm kAllAlgorithms[] = {
        Algorithm::BruteForce,    Algorithm::PostFilterHnsw, Algorithm::PostFilterIvfPq, Algorithm::AcornGamma,
        Algorithm::AcornOne,      Algorithm::Ung,            Algorithm::FilteredVamana,  Algorithm::StitchedVamana,
        Algorithm::Nhq,           Algorithm::Caps};

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

/// Named numeric parameters, written as "M=16;gamma=4".
using ParamMap = std::map<std::string, double>;

std::string format_params(const ParamMap& params);
ParamMap parse_params(std::string_view text);

/// Overlays `given` on `defaults`; unknown keys are a ParameterError.
ParamMap merge_params(const ParamMap& defaults, const ParamMap& given, std::string_view owner);

struct SearchOutput {
    std::vector<Neighbor> neighbors;  // ascending by (distance, id), at most k
    std::uint32_t rounds = 1;
    std::uint32_t final_scope = 0;
    std::size_t distance_evals = 0;
    std::size_t label_checks = 0;
};

class StrategyIndex {
public:
    StrategyIndex(std::shared_ptr<const Dataset> data, Metric metric, ParamMap params);
    virtual ~StrategyIndex() = default;

    virtual Algorithm algorithm() const = 0;
    virtual bool supports(Constraint c) const;
    /// Whether search consumes a precomputed filter bitmap.
    virtual bool uses_bitmap() const { return false; }

    /// Filtered top-k. `knob` is the search-time parameter (beam width,
    /// nprobe, ...). A null `bitmap` is computed on demand when needed.
    virtual SearchOutput search(const FilteredQuery& query, std::uint32_t knob,
                                const FilterBitmap* bitmap = nullptr) const = 0;

    virtual std::string_view knob_name() const { return "l"; }
    virtual std::vector<std::uint32_t> default_sweep() const;

    virtual void save_payload(BinaryWriter& out) const = 0;

    const Dataset& data() const { return *data_; }
    std::shared_ptr<const Dataset> shared_data() const { return data_; }
    Metric metric() const { return metric_; }
    const ParamMap& params() const { return params_; }
    double param(const std::string& key) const { return params_.at(key); }
    const InvertedLabelIndex& label_index() const { return labels_; }

    FilterBitmap make_bitmap(const FilteredQuery& query) const;

protected:
    /// Throws UnsupportedError / ConstraintError / ParameterError for queries
    /// this index cannot answer.
    void validate(const FilteredQuery& query) const;

    std::shared_ptr<const Dataset> data_;
    Metric metric_;
    ParamMap params_;
    InvertedLabelIndex labels_;
};

struct BuildOptions {
    Metric metric = Metric::SquaredEuclidean;
    std::uint64_t seed = 42;
    int threads = 1;
};

/// Default build parameters of an algorithm.
ParamMap default_params(Algorithm algorithm);

std::unique_ptr<StrategyIndex> build_index(Algorithm algorithm,
                                           std::shared_ptr<const Dataset> data,
                                           const ParamMap& params,
                                           const BuildOptions& options = {});

/// Container bytes: metadata JSON, then the dataset block and the strategy
/// payload.
std::vector<std::uint8_t> serialize_index(const StrategyIndex& index);
std::unique_ptr<StrategyIndex> deserialize_index(const std::vector<std::uint8_t>& bytes);

}  // namespace fanns
