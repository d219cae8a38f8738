#include "fanns/harness.h"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <istream>
#include <ostream>

#include "fanns/metrics.h"

namespace fanns {

namespace {

std::vector<idx_t> ids_of(const SearchOutput& out) {
    std::vector<idx_t> ids;
    ids.reserve(out.neighbors.size());
    for (const auto& nb : out.neighbors) {
        ids.push_back(nb.id);
    }
    return ids;
}

FilteredQuery with_k(const FilteredQuery& q, std::uint32_t k) {
    FilteredQuery out = q;
    out.k = k;
    return out;
}

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& field, std::size_t line_no, const char* column) {
    T v{};
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw FormatError("run CSV line " + std::to_string(line_no) + ": bad " + column + " '" + field + "'");
    }
    return v;
}

}  // namespace

std::vector<std::vector<idx_t>> search_batch(const StrategyIndex& index, std::span<const FilteredQuery> queries,
                                             std::uint32_t knob, std::uint32_t k, int threads,
                                             const std::vector<FilterBitmap>* bitmaps) {
    std::vector<std::vector<idx_t>> out(queries.size());
    const bool make = index.uses_bitmap() && bitmaps == nullptr;
    const auto n = std::ptrdiff_t(queries.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(threads, 1))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const FilteredQuery q = with_k(queries[std::size_t(i)], k);
        if (make) {
            const FilterBitmap bm = index.make_bitmap(q);
            out[std::size_t(i)] = ids_of(index.search(q, knob, &bm));
        } else {
            const FilterBitmap* bm = bitmaps ? &(*bitmaps)[std::size_t(i)] : nullptr;
            out[std::size_t(i)] = ids_of(index.search(q, knob, bm));
        }
    }
    return out;
}

std::vector<std::vector<idx_t>> search_batch_serial(const StrategyIndex& index, std::span<const FilteredQuery> queries,
                                                    std::uint32_t knob, std::uint32_t k) {
    std::vector<std::vector<idx_t>> out;
    out.reserve(queries.size());
    for (const auto& query : queries) {
        out.push_back(ids_of(index.search(with_k(query, k), knob)));
    }
    return out;
}

double mean_recall(const std::vector<std::vector<idx_t>>& results, const std::vector<GroundTruth>& truth,
                   std::uint32_t k) {
    if (results.size() != truth.size()) {
        throw ParameterError("result and ground-truth counts differ");
    }
    if (results.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (truth[i].ids.empty()) {
            sum += results[i].empty() ? 1.0 : 0.0;
        } else {
            sum += recall_at_k(results[i], truth[i], k);
        }
    }
    return sum / double(results.size());
}

std::vector<RunPoint> run_workload(const StrategyIndex& index, const Workload& workload,
                                   std::span<const std::uint32_t> sweep, const RunOptions& options) {
    if (!index.supports(workload.scenario)) {
        throw UnsupportedError(std::string(to_string(index.algorithm())) + " does not support the " +
                               std::string(to_string(workload.scenario)) + " scenario");
    }
    if (workload.truth.size() != workload.queries.size()) {
        throw ParameterError("workload has no ground truth for every query");
    }
    if (options.k == 0 || options.k > workload.k_max) {
        throw ParameterError("k = " + std::to_string(options.k) + " outside the ground-truth depth " +
                             std::to_string(workload.k_max));
    }
    for (const auto& q : workload.queries) {
        if (q.constraint != workload.scenario) {
            throw ParameterError("query constraint differs from the workload scenario");
        }
    }
    const std::span<const FilteredQuery> queries = workload.queries;
    std::vector<FilterBitmap> bitmaps;
    const bool precompute = options.exclude_filter_time && index.uses_bitmap();
    if (precompute) {
        bitmaps.reserve(queries.size());
        for (const auto& q : queries) {
            bitmaps.push_back(index.make_bitmap(q));
        }
    }
    const auto* bm = precompute ? &bitmaps : nullptr;

    std::vector<RunPoint> out;
    for (std::uint32_t knob : sweep) {
        const std::size_t warm = std::min(options.warmup, queries.size());
        if (warm > 0) {
            std::vector<FilterBitmap> warm_bitmaps;
            if (precompute) {
                warm_bitmaps.assign(bitmaps.begin(), bitmaps.begin() + std::ptrdiff_t(warm));
            }
            search_batch(index, queries.first(warm), knob, options.k, options.threads,
                         precompute ? &warm_bitmaps : nullptr);
        }
        const auto start = std::chrono::steady_clock::now();
        const auto results = search_batch(index, queries, knob, options.k, options.threads, bm);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        RunPoint p;
        p.dataset = options.dataset.empty() ? workload.dataset : options.dataset;
        p.algorithm = std::string(to_string(index.algorithm()));
        p.scenario = std::string(to_string(workload.scenario));
        p.param_id = options.param_id;
        p.params = format_params(index.params());
        p.knob = knob;
        p.k = options.k;
        p.threads = options.threads;
        p.recall = mean_recall(results, workload.truth, options.k);
        p.qps = double(queries.size()) / std::max(elapsed, 1e-9);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<RunPoint> pareto_frontier(const std::vector<RunPoint>& points) {
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    // recall descending, then qps descending: a point survives when its qps
    // beats every point with higher recall and it is not beaten at equal recall
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].recall != points[b].recall) {
            return points[a].recall > points[b].recall;
        }
        return points[a].qps > points[b].qps;
    });
    std::vector<std::size_t> keep;
    double best_higher = -1.0;  // max qps over strictly higher recall
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        const double r = points[order[i]].recall;
        const double top = points[order[i]].qps;
        while (j < order.size() && points[order[j]].recall == r) {
            const double q = points[order[j]].qps;
            if (q == top && q > best_higher) {
                keep.push_back(order[j]);
            }
            ++j;
        }
        best_higher = std::max(best_higher, top);
        i = j;
    }
    std::sort(keep.begin(), keep.end());
    std::stable_sort(keep.begin(), keep.end(),
                     [&](std::size_t a, std::size_t b) { return points[a].recall < points[b].recall; });
    std::vector<RunPoint> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) {
        out.push_back(points[i]);
    }
    return out;
}

void write_run_csv(std::ostream& out, const std::vector<RunPoint>& points, bool header) {
    if (header) {
        out << kRunCsvHeader << '\n';
    }
    for (const auto& p : points) {
        out << quote(p.dataset) << ',' << quote(p.algorithm) << ',' << quote(p.scenario) << ',' << quote(p.param_id)
            << ',' << quote(p.params) << ',' << p.knob << ',' << p.k << ',' << p.threads << ',' << number(p.recall)
            << ',' << number(p.qps) << '\n';
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

std::vector<RunPoint> read_run_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("run CSV is empty");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kRunCsvHeader) {
        throw FormatError("run CSV header is '" + line + "', expected '" + kRunCsvHeader + "'");
    }
    std::vector<RunPoint> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 10) {
            throw FormatError("run CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                              " fields, expected 10");
        }
        RunPoint p;
        p.dataset = f[0];
        p.algorithm = f[1];
        p.scenario = f[2];
        p.param_id = f[3];
        p.params = f[4];
        p.knob = parse_number<std::uint32_t>(f[5], line_no, "knob");
        p.k = parse_number<std::uint32_t>(f[6], line_no, "k");
        p.threads = parse_number<int>(f[7], line_no, "threads");
        p.recall = parse_number<double>(f[8], line_no, "recall");
        p.qps = parse_number<double>(f[9], line_no, "qps");
        if (p.recall < 0 || p.recall > 1) {
            throw FormatError("run CSV line " + std::to_string(line_no) + ": recall outside [0, 1]");
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_build_log(std::ostream& out, const std::vector<BuildLogRow>& rows, bool header) {
    if (header) {
        out << kBuildLogHeader << '\n';
    }
    for (const auto& r : rows) {
        out << quote(r.algorithm) << ',' << quote(r.param_id) << ',' << quote(r.params) << ','
            << number(r.build_seconds) << ',' << r.index_bytes << '\n';
    }
}

}  // namespace fanns
