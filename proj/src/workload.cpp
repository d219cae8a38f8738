#include "fanns/workload.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fanns/exact_oracle.h"
#include "fanns/label_filter.h"
#include "fanns/serialize.h"
#include "json.hpp"

namespace fanns {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::int64_t> parse_label_line(std::string_view line, std::size_t line_no, const std::string& where) {
    std::vector<std::int64_t> out;
    std::size_t start = 0;
    const std::string text = trim(line);
    if (text.empty()) {
        return out;
    }
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string token = trim(std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        std::int64_t v = 0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
        if (token.empty() || res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
            throw FormatError(where + ":" + std::to_string(line_no) + ": label '" + token + "' is not an integer");
        }
        out.push_back(v);
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream)};
    return std::mt19937_64(seq);
}

std::vector<double> selectivities(std::span<const LabelSet> base, std::span<const LabelSet> candidates,
                                  Constraint scenario) {
    const InvertedLabelIndex index(base);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        out.push_back(double(filter_map(index, c, scenario, base).count()) / double(std::max<std::size_t>(base.size(), 1)));
    }
    return out;
}

}  // namespace

Matrix load_fvecs(const std::filesystem::path& path) {
    BinaryReader in(read_file_bytes(path));
    Matrix m;
    while (!in.at_end()) {
        const auto offset = in.position();
        if (in.remaining() < 4) {
            in.fail("truncated fvecs header in " + path.string());
        }
        const auto d = in.get<std::int32_t>();
        if (d <= 0) {
            throw FormatError("fvecs record at byte offset " + std::to_string(offset) + " has dimension " +
                              std::to_string(d));
        }
        if (m.dim == 0) {
            m.dim = std::size_t(d);
        } else if (std::size_t(d) != m.dim) {
            throw FormatError("fvecs record at byte offset " + std::to_string(offset) + " has dimension " +
                              std::to_string(d) + ", expected " + std::to_string(m.dim));
        }
        const std::size_t old = m.values.size();
        m.values.resize(old + m.dim);
        in.get_raw(m.values.data() + old, m.dim * sizeof(float));
    }
    return m;
}

void save_fvecs(const std::filesystem::path& path, const Matrix& m) {
    BinaryWriter out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out.put<std::int32_t>(std::int32_t(m.dim));
        out.put_raw(m.values.data() + i * m.dim, m.dim * sizeof(float));
    }
    write_file_bytes(path, out.bytes());
}

LabelMapping::LabelMapping(std::vector<std::int64_t> raw_of_dense) : raw_(std::move(raw_of_dense)) {
    for (label_t i = 0; i < raw_.size(); ++i) {
        if (!dense_.emplace(raw_[i], i).second) {
            throw FormatError("label mapping lists raw id " + std::to_string(raw_[i]) + " twice");
        }
    }
}

LabelSet LabelMapping::to_dense(const std::vector<std::int64_t>& raw) const {
    std::vector<label_t> out;
    std::map<std::int64_t, label_t> unknown;
    for (std::int64_t r : raw) {
        const auto it = dense_.find(r);
        if (it != dense_.end()) {
            out.push_back(it->second);
        } else {
            const auto [u, fresh] = unknown.emplace(r, label_t(raw_.size() + unknown.size()));
            out.push_back(u->second);
        }
    }
    return LabelSet::from_unsorted(std::move(out));
}

std::vector<std::int64_t> LabelMapping::to_raw(const LabelSet& dense) const {
    std::vector<std::int64_t> out;
    for (label_t x : dense) {
        if (x >= raw_.size()) {
            throw ParameterError("dense label " + std::to_string(x) + " has no raw id");
        }
        out.push_back(raw_[x]);
    }
    return out;
}

LabelMapping LabelMapping::identity(std::size_t universe) {
    std::vector<std::int64_t> raw(universe);
    std::iota(raw.begin(), raw.end(), std::int64_t{0});
    return LabelMapping(std::move(raw));
}

void LabelMapping::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (std::int64_t r : raw_) {
        out << r << '\n';
    }
}

LabelMapping LabelMapping::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::vector<std::int64_t> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto ids = parse_label_line(line, line_no, path.string());
        if (ids.size() != 1) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected one raw label id");
        }
        raw.push_back(ids[0]);
    }
    return LabelMapping(std::move(raw));
}

std::vector<std::vector<std::int64_t>> read_raw_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::vector<std::vector<std::int64_t>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        out.push_back(parse_label_line(line, line_no, path.string()));
    }
    return out;
}

void write_raw_labels(const std::filesystem::path& path, const std::vector<std::vector<std::int64_t>>& labels) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (const auto& row : labels) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << row[i];
        }
        out << '\n';
    }
}

LabelFile load_labels(const std::filesystem::path& path) {
    const auto raw = read_raw_labels(path);
    std::set<std::int64_t> distinct;
    for (const auto& row : raw) {
        distinct.insert(row.begin(), row.end());
    }
    LabelFile out;
    out.mapping = LabelMapping(std::vector<std::int64_t>(distinct.begin(), distinct.end()));
    out.sets.reserve(raw.size());
    for (const auto& row : raw) {
        out.sets.push_back(out.mapping.to_dense(row));
    }
    return out;
}

void save_labels(const std::filesystem::path& path, const std::vector<LabelSet>& sets, const LabelMapping& mapping) {
    std::vector<std::vector<std::int64_t>> raw;
    raw.reserve(sets.size());
    for (const auto& s : sets) {
        raw.push_back(mapping.to_raw(s));
    }
    write_raw_labels(path, raw);
    mapping.save(path.string() + ".map");
}

Dataset load_dataset_files(const std::filesystem::path& fvecs, const std::filesystem::path& labels, LabelMapping* mapping) {
    Matrix m = load_fvecs(fvecs);
    LabelFile lf = load_labels(labels);
    if (lf.sets.size() != m.rows()) {
        throw FormatError(labels.string() + " has " + std::to_string(lf.sets.size()) + " rows but " + fvecs.string() +
                          " has " + std::to_string(m.rows()) + " vectors");
    }
    if (mapping) {
        *mapping = lf.mapping;
    }
    return Dataset(m.dim, std::move(m.values), std::move(lf.sets));
}

std::vector<float> gen_clustered_vectors(std::size_t n, std::size_t dim, std::size_t clusters, std::uint64_t seed) {
    if (clusters == 0 || dim == 0) {
        throw ParameterError("clustered vectors need clusters >= 1 and dim >= 1");
    }
    auto rng = make_rng(seed, 1);
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> centers(clusters * dim);
    for (float& x : centers) {
        x = 1.5f * g(rng);
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

LabelSet encode_fixed_length(std::span<const std::uint32_t> positional, std::size_t values_per_position) {
    std::vector<label_t> out;
    for (std::size_t p = 0; p < positional.size(); ++p) {
        if (positional[p] >= values_per_position) {
            throw ParameterError("label value " + std::to_string(positional[p]) + " at position " + std::to_string(p) +
                                 " exceeds " + std::to_string(values_per_position) + " values");
        }
        out.push_back(label_t(p * values_per_position + positional[p]));
    }
    return LabelSet::from_unsorted(std::move(out));
}

std::vector<std::uint32_t> decode_fixed_length(const LabelSet& labels, std::size_t values_per_position) {
    std::vector<std::uint32_t> out;
    std::size_t p = 0;
    for (label_t x : labels) {
        if (x / values_per_position != p) {
            throw ConstraintError("label set " + labels.to_string() + " is not a fixed-length label vector");
        }
        out.push_back(std::uint32_t(x % values_per_position));
        ++p;
    }
    return out;
}

std::vector<LabelSet> gen_fixed_length_labels(std::size_t n, std::size_t length, std::size_t values_per_position,
                                              std::uint64_t seed) {
    if (length == 0 || values_per_position == 0) {
        throw ParameterError("fixed-length labels need length >= 1 and values >= 1");
    }
    auto rng = make_rng(seed, 2);
    std::uniform_int_distribution<std::uint32_t> pick(0, std::uint32_t(values_per_position - 1));
    std::vector<LabelSet> out;
    out.reserve(n);
    std::vector<std::uint32_t> positional(length);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : positional) {
            v = pick(rng);
        }
        out.push_back(encode_fixed_length(positional, values_per_position));
    }
    return out;
}

std::vector<LabelSet> gen_skewed_labels(std::size_t n, std::size_t universe, std::uint64_t seed) {
    if (universe == 0) {
        throw ParameterError("label universe must be >= 1");
    }
    auto rng = make_rng(seed, 3);
    std::vector<double> weights(universe);
    for (std::size_t r = 0; r < universe; ++r) {
        weights[r] = 1.0 / double(r + 1);
    }
    std::discrete_distribution<label_t> zipf(weights.begin(), weights.end());
    std::bernoulli_distribution second(0.3);
    std::bernoulli_distribution third(0.1);
    std::vector<LabelSet> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<label_t> labels{zipf(rng)};
        const std::size_t extra = std::size_t(second(rng)) + std::size_t(third(rng));
        for (std::size_t e = 0; e < extra && labels.size() < universe; ++e) {
            label_t x = zipf(rng);
            while (std::find(labels.begin(), labels.end(), x) != labels.end()) {
                x = zipf(rng);
            }
            labels.push_back(x);
        }
        out.push_back(LabelSet::from_unsorted(std::move(labels)));
    }
    return out;
}

QuerySeeds stratify_by_length(std::span<const LabelSet> base, Constraint, std::size_t per_group, std::uint64_t seed,
                              std::size_t groups) {
    if (base.empty() || groups == 0) {
        throw ParameterError("length stratification needs base labels and >= 1 group");
    }
    std::vector<std::size_t> lengths;
    for (const auto& s : base) {
        lengths.push_back(s.size());
    }
    std::sort(lengths.begin(), lengths.end());
    // upper length bound of each group at its quantile
    std::vector<std::size_t> bounds;
    for (std::size_t g = 1; g <= groups; ++g) {
        const std::size_t rank = std::min(lengths.size() - 1, (g * lengths.size() + groups - 1) / groups - 1);
        bounds.push_back(g == groups ? lengths.back() : lengths[rank]);
    }
    std::vector<std::vector<idx_t>> buckets(groups);
    for (idx_t i = 0; i < base.size(); ++i) {
        const std::size_t len = base[i].size();
        std::size_t g = 0;
        while (g + 1 < groups && len > bounds[g]) {
            ++g;
        }
        if (g == 0 || len > bounds[g - 1]) {
            buckets[g].push_back(i);
        }
    }
    static const char* kNames[] = {"short", "medium", "long"};
    QuerySeeds out;
    auto rng = make_rng(seed, 4);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::string name = groups == 3 ? kNames[g] : "length-group-" + std::to_string(g);
        std::size_t source = g;
        while (buckets[source].empty() && source > 0) {
            --source;
        }
        if (buckets[source].empty()) {
            for (source = g; source < groups && buckets[source].empty(); ++source) {
            }
        }
        if (source != g) {
            out.warnings.push_back("length group '" + name + "' is empty; reusing the records of group " +
                                   std::to_string(source));
        }
        const auto& pool = buckets[source];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < per_group; ++i) {
            out.labels.push_back(base[pool[pick(rng)]]);
            out.strata.push_back(name);
        }
    }
    return out;
}

std::vector<LabelSet> candidate_label_sets(std::span<const LabelSet> base, Constraint scenario) {
    std::set<LabelSet> out(base.begin(), base.end());
    if (scenario == Constraint::Containment || scenario == Constraint::Overlap) {
        for (const auto& s : base) {
            const auto ls = s.labels();
            for (std::size_t i = 0; i < ls.size(); ++i) {
                out.insert(LabelSet{ls[i]});
                for (std::size_t j = i + 1; j < ls.size(); ++j) {
                    out.insert(LabelSet{ls[i], ls[j]});
                }
            }
        }
    }
    out.erase(LabelSet{});
    return {out.begin(), out.end()};
}

QuerySeeds stratify_by_selectivity(std::span<const LabelSet> base, Constraint scenario,
                                   std::span<const double> percentiles, std::size_t per_group, std::uint64_t seed) {
    auto candidates = candidate_label_sets(base, scenario);
    if (candidates.empty()) {
        throw ParameterError("no candidate query label sets");
    }
    const auto sigma = selectivities(base, candidates, scenario);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] < sigma[b]; });

    const std::size_t c = order.size();
    const std::size_t window = std::max<std::size_t>(1, c / 20);
    std::vector<double> targets;
    for (double p : percentiles) {
        if (p < 0 || p > 100) {
            throw ParameterError("percentile " + std::to_string(p) + " outside [0, 100]");
        }
        targets.push_back(p / 100.0 * double(c - 1));
    }
    // each sorted rank joins the nearest target within the window
    std::vector<std::vector<std::size_t>> buckets(targets.size());
    for (std::size_t r = 0; r < c; ++r) {
        std::size_t best = targets.size();
        double best_gap = double(window) / 2.0 + 0.5;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const double gap = std::abs(double(r) - targets[t]);
            if (gap < best_gap) {
                best_gap = gap;
                best = t;
            }
        }
        if (best < targets.size()) {
            buckets[best].push_back(order[r]);
        }
    }
    QuerySeeds out;
    bool all_same = true;
    for (std::size_t i = 1; i < c; ++i) {
        all_same = all_same && sigma[order[i]] == sigma[order[0]];
    }
    if (all_same) {
        out.warnings.push_back("every candidate has selectivity " + std::to_string(sigma[order[0]]) +
                               "; all buckets are identical");
    }
    auto rng = make_rng(seed, 5);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const std::string name = "p" + std::to_string(int(std::lround(percentiles[t])));
        if (buckets[t].empty()) {
            out.warnings.push_back("selectivity bucket " + name + " is empty");
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, buckets[t].size() - 1);
        for (std::size_t i = 0; i < per_group; ++i) {
            out.labels.push_back(candidates[buckets[t][pick(rng)]]);
            out.strata.push_back(name);
        }
    }
    return out;
}

QuerySeeds queries_near_selectivity(std::span<const LabelSet> base, Constraint scenario, double target,
                                    std::size_t count, std::uint64_t seed) {
    if (target <= 0) {
        throw ParameterError("target selectivity must be positive");
    }
    const auto candidates = candidate_label_sets(base, scenario);
    if (candidates.empty()) {
        throw ParameterError("no candidate query label sets");
    }
    const auto sigma = selectivities(base, candidates, scenario);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto gap = [&](std::size_t i) { return sigma[i] > 0 ? std::abs(std::log(sigma[i] / target)) : 1e9; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gap(a) < gap(b); });
    // the nearest candidate, plus any others within 25% of the target
    std::vector<std::size_t> pool{order[0]};
    for (std::size_t i = 1; i < order.size() && gap(order[i]) < std::log(1.25); ++i) {
        pool.push_back(order[i]);
    }
    QuerySeeds out;
    auto rng = make_rng(seed, 6);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::string name = "sigma=" + std::to_string(target);
    for (std::size_t i = 0; i < count; ++i) {
        out.labels.push_back(candidates[pool[pick(rng)]]);
        out.strata.push_back(name);
    }
    return out;
}

void attach_ground_truth(Workload& w, const Dataset& data, Metric metric, int threads) {
    const InvertedLabelIndex index(data.all_labels());
    const auto results = exact_knn_batch(data, index, w.queries, w.k_max, metric, threads);
    Workload kept = w;
    kept.queries.clear();
    kept.truth.clear();
    kept.satisfied.clear();
    kept.strata.clear();
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (w.guarantee && results[i].neighbors.size() < w.k_max) {
            continue;
        }
        kept.queries.push_back(w.queries[i]);
        kept.truth.push_back(results[i].to_ground_truth());
        kept.satisfied.push_back(results[i].satisfied_count);
        kept.strata.push_back(i < w.strata.size() ? w.strata[i] : std::string{});
    }
    if (kept.queries.empty()) {
        throw Error("every query was dropped: none has " + std::to_string(w.k_max) + " matching records");
    }
    w = std::move(kept);
}

HeldOut hold_out(const Dataset& data, std::size_t count, std::uint64_t seed) {
    if (count >= data.size()) {
        throw ParameterError("cannot hold out " + std::to_string(count) + " of " + std::to_string(data.size()) +
                             " records");
    }
    std::vector<idx_t> ids(data.size());
    std::iota(ids.begin(), ids.end(), idx_t{0});
    auto rng = make_rng(seed, 7);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<idx_t> held(ids.begin(), ids.begin() + std::ptrdiff_t(count));
    std::vector<idx_t> rest(ids.begin() + std::ptrdiff_t(count), ids.end());
    std::sort(held.begin(), held.end());
    std::sort(rest.begin(), rest.end());
    HeldOut out;
    out.base = data.subset(rest);
    out.queries.dim = data.dim();
    for (idx_t id : held) {
        const auto v = data.vector(id);
        out.queries.values.insert(out.queries.values.end(), v.begin(), v.end());
        out.query_labels.push_back(data.labels(id));
    }
    return out;
}

void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruth>& truth) {
    BinaryWriter out;
    for (const auto& gt : truth) {
        if (gt.ids.size() != gt.distances.size()) {
            throw ParameterError("ground truth ids and distances differ in length");
        }
        out.put<std::int32_t>(std::int32_t(gt.ids.size()));
        for (std::size_t i = 0; i < gt.ids.size(); ++i) {
            out.put<std::int32_t>(std::int32_t(gt.ids[i]));
            out.put<float>(gt.distances[i]);
        }
    }
    write_file_bytes(path, out.bytes());
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
    BinaryReader in(read_file_bytes(path));
    std::vector<GroundTruth> out;
    while (!in.at_end()) {
        const auto count = in.get<std::int32_t>();
        if (count < 0 || std::size_t(count) * 8 > in.remaining()) {
            in.fail("ground-truth block of " + std::to_string(count) + " entries does not fit");
        }
        GroundTruth gt;
        for (std::int32_t i = 0; i < count; ++i) {
            const auto id = in.get<std::int32_t>();
            if (id < 0) {
                in.fail("negative ground-truth id");
            }
            gt.ids.push_back(idx_t(id));
            gt.distances.push_back(in.get<float>());
        }
        out.push_back(std::move(gt));
    }
    return out;
}

void save_workload(const std::filesystem::path& dir, const Workload& w, const LabelMapping& mapping) {
    std::filesystem::create_directories(dir);
    Matrix q;
    q.dim = w.queries.empty() ? 0 : w.queries.front().embedding.size();
    std::vector<std::vector<std::int64_t>> raw;
    for (const auto& query : w.queries) {
        q.values.insert(q.values.end(), query.embedding.begin(), query.embedding.end());
        raw.push_back(mapping.to_raw(query.labels));
    }
    save_fvecs(dir / "queries.fvecs", q);
    write_raw_labels(dir / "queries.labels", raw);
    write_ground_truth(dir / "gt.bin", w.truth);

    nlohmann::json m;
    m["dataset"] = w.dataset;
    m["scenario"] = std::string(to_string(w.scenario));
    m["k_max"] = w.k_max;
    m["guarantee"] = w.guarantee;
    m["stratification"] = w.stratification;
    m["num_queries"] = w.queries.size();
    m["queries_fvecs"] = "queries.fvecs";
    m["queries_labels"] = "queries.labels";
    m["ground_truth"] = "gt.bin";
    m["satisfied"] = w.satisfied;
    m["strata"] = w.strata;
    m["label_map"] = mapping.raw_ids();
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw Error("cannot write " + (dir / "manifest.json").string());
    }
    out << m.dump(2) << '\n';
}

Workload load_workload(const std::filesystem::path& path) {
    const auto manifest = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    const auto dir = manifest.parent_path();
    std::ifstream in(manifest);
    if (!in) {
        throw Error("cannot read " + manifest.string());
    }
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    Workload w;
    try {
        w.dataset = m.value("dataset", "");
        w.scenario = parse_constraint(m.at("scenario").get<std::string>());
        w.k_max = m.at("k_max").get<std::uint32_t>();
        w.guarantee = m.value("guarantee", true);
        w.stratification = m.value("stratification", "none");
        const LabelMapping mapping(m.at("label_map").get<std::vector<std::int64_t>>());
        const Matrix q = load_fvecs(dir / m.at("queries_fvecs").get<std::string>());
        const auto raw = read_raw_labels(dir / m.at("queries_labels").get<std::string>());
        w.truth = read_ground_truth(dir / m.at("ground_truth").get<std::string>());
        if (raw.size() != q.rows() || w.truth.size() != q.rows()) {
            throw FormatError(manifest.string() + ": query vectors, labels and ground truth disagree in count");
        }
        for (std::size_t i = 0; i < q.rows(); ++i) {
            FilteredQuery fq;
            fq.embedding.assign(q.row(i).begin(), q.row(i).end());
            fq.labels = mapping.to_dense(raw[i]);
            fq.constraint = w.scenario;
            w.queries.push_back(std::move(fq));
        }
        w.satisfied = m.value("satisfied", std::vector<std::size_t>(q.rows(), 0));
        w.strata = m.value("strata", std::vector<std::string>(q.rows()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    return w;
}

}  // namespace fanns
