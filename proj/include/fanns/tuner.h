#pragma once

// Grid tuning on a sampled dataset: build-parameter subspaces, QPS at fixed
// recall targets and rank-sum selection of one config per subspace.

#include <optional>
#include <string>
#include <vector>

#include "fanns/harness.h"
#include "fanns/strategy.h"
#include "fanns/workload.h"

namespace fanns {

struct ParamSpace {
    std::map<std::string, std::vector<double>> build;  // per-parameter grids
    std::vector<std::uint32_t> sweep;                   // search-time knob values

    /// Build configs in lexicographic order: the first key varies slowest.
    std::vector<ParamMap> configs() const;
    std::size_t size() const;
};

/// Small default grid per algorithm.
ParamSpace default_space(Algorithm algorithm);

struct Subspace {
    std::size_t index = 0;
    std::vector<ParamMap> configs;
};

/// Contiguous blocks of the build configs; n_sub = 0 picks the number of
/// configs capped at 8. Larger n_sub is clamped with a warning.
std::vector<Subspace> partition_space(const ParamSpace& space, std::size_t n_sub,
                                      std::vector<std::string>* warnings = nullptr);

struct CurvePoint {
    double recall = 0.0;
    double qps = 0.0;
    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};
using Curve = std::vector<CurvePoint>;

/// Pointwise mean over curves from the same sweep, then sorted by recall.
Curve average_curves(const std::vector<Curve>& curves);

/// Piecewise-linear QPS at each recall target. Above the best recall the
/// QPS is 0; below the lowest it is the lowest point's QPS. Points with
/// equal recall keep the highest QPS.
std::vector<double> interpolate_qps(const Curve& curve, std::span<const double> targets);

inline constexpr double kDefaultTargets[] = {0.8, 0.9, 0.95};

struct ConfigEvaluation {
    ParamMap params;
    bool valid = true;
    std::string error;
    std::vector<std::pair<std::string, Curve>> scenario_curves;
    Curve averaged;
    std::vector<double> qps_at_targets;
    std::vector<std::size_t> ranks;  // per target, 1 = best
    std::size_t rank_sum = 0;
};

/// Fills ranks and rank sums; returns the selected evaluation, or nullopt
/// when none is valid. Rank at a target = 1 + number of valid configs with
/// strictly higher QPS; invalid configs rank last.
std::optional<std::size_t> rank_and_select(std::vector<ConfigEvaluation>& evaluations);

struct TuneOptions {
    std::size_t n_sub = 0;
    std::vector<double> targets{std::begin(kDefaultTargets), std::end(kDefaultTargets)};
    std::uint32_t k = 10;
    int threads = 1;
    std::uint64_t seed = 42;
    Metric metric = Metric::SquaredEuclidean;
    std::size_t warmup = 100;
};

ConfigEvaluation evaluate_config(Algorithm algorithm, const ParamMap& params, std::shared_ptr<const Dataset> sample,
                                 const std::vector<Workload>& workloads, std::span<const std::uint32_t> sweep,
                                 const TuneOptions& options);

struct SubspaceResult {
    Subspace subspace;
    std::vector<ConfigEvaluation> evaluations;
    std::optional<std::size_t> selected;
};

struct TuningReport {
    std::string algorithm;
    std::vector<double> targets;
    std::size_t sample_size = 0;
    std::vector<SubspaceResult> subspaces;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

/// Record ids of a uniform sample: `fraction` of n with a floor, all of n
/// when n is at most the floor. Sorted.
std::vector<idx_t> sample_ids(std::size_t n, double fraction, std::size_t floor, std::uint64_t seed);

/// Same queries, ground truth recomputed over `sample` at depth k without
/// dropping any query.
Workload resample_workload(const Workload& workload, const Dataset& sample, std::uint32_t k, Metric metric,
                           int threads);

/// Every subspace evaluated on `sample`; workloads must already carry truth
/// for it.
TuningReport tune(Algorithm algorithm, const ParamSpace& space, std::shared_ptr<const Dataset> sample,
                  const std::vector<Workload>& workloads, const TuneOptions& options);

}  // namespace fanns
