#pragma once

// Query-parallel benchmark runs, Pareto frontiers and the CSV schemas.

#include <iosfwd>
#include <string>
#include <vector>

#include "fanns/strategy.h"
#include "fanns/workload.h"

namespace fanns {

struct RunPoint {
    std::string dataset;
    std::string algorithm;
    std::string scenario;
    std::string param_id;
    std::string params;
    std::uint32_t knob = 0;
    std::uint32_t k = 10;
    int threads = 1;
    double recall = 0.0;
    double qps = 0.0;

    friend bool operator==(const RunPoint&, const RunPoint&) = default;
};

struct RunOptions {
    std::uint32_t k = 10;
    int threads = 1;
    std::size_t warmup = 100;
    /// Precompute filter bitmaps outside the timed region.
    bool exclude_filter_time = false;
    std::string dataset;
    std::string param_id;
};

/// Result ids of every query at one knob value. Queries are spread over
/// `threads` workers; each query runs single-threaded.
std::vector<std::vector<idx_t>> search_batch(const StrategyIndex& index, std::span<const FilteredQuery> queries,
                                             std::uint32_t knob, std::uint32_t k, int threads,
                                             const std::vector<FilterBitmap>* bitmaps = nullptr);
/// Reference for search_batch: one query after another.
std::vector<std::vector<idx_t>> search_batch_serial(const StrategyIndex& index, std::span<const FilteredQuery> queries,
                                                    std::uint32_t knob, std::uint32_t k);

/// Mean recall@k over queries. A query with no satisfying record scores 1
/// when nothing is returned.
double mean_recall(const std::vector<std::vector<idx_t>>& results, const std::vector<GroundTruth>& truth,
                   std::uint32_t k);

/// One RunPoint per knob value: qps = |queries| / wall time of the batch.
std::vector<RunPoint> run_workload(const StrategyIndex& index, const Workload& workload,
                                   std::span<const std::uint32_t> sweep, const RunOptions& options);

/// Points not dominated by any other (>= recall and > qps, or > recall and
/// >= qps), ordered by recall ascending, input order among equal recall.
std::vector<RunPoint> pareto_frontier(const std::vector<RunPoint>& points);

inline constexpr const char* kRunCsvHeader = "dataset,algorithm,scenario,param_id,params,knob,k,threads,recall,qps";
void write_run_csv(std::ostream& out, const std::vector<RunPoint>& points, bool header = true);
std::vector<RunPoint> read_run_csv(std::istream& in);

struct BuildLogRow {
    std::string algorithm;
    std::string param_id;
    std::string params;
    double build_seconds = 0.0;
    std::size_t index_bytes = 0;
};

inline constexpr const char* kBuildLogHeader = "algorithm,param_id,params,build_seconds,index_bytes";
void write_build_log(std::ostream& out, const std::vector<BuildLogRow>& rows, bool header = true);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace fanns
