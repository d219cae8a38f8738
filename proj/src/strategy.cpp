#include "fanns/strategy.h"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "fanns/exact_oracle.h"
#include "json.hpp"
#include "strategy_internal.h"

namespace fanns {

namespace {

struct AlgorithmInfo {
    Algorithm algorithm;
    std::string_view name;
};

constexpr AlgorithmInfo kAlgorithmNames[] = {
        {Algorithm::BruteForce, "bruteforce"},
        {Algorithm::PostFilterHnsw, "postfilter-hnsw"},
        {Algorithm::PostFilterIvfPq, "postfilter-ivfpq"},
        {Algorithm::AcornGamma, "acorn-gamma"},
        {Algorithm::AcornOne, "acorn-1"},
        {Algorithm::Ung, "ung"},
        {Algorithm::FilteredVamana, "filtered-vamana"},
        {Algorithm::StitchedVamana, "stitched-vamana"},
        {Algorithm::Nhq, "nhq"},
        {Algorithm::Caps, "caps"},
};

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Algorithm a) {
    for (const auto& info : kAlgorithmNames) {
        if (info.algorithm == a) {
            return info.name;
        }
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    for (const auto& info : kAlgorithmNames) {
        if (info.name == name) {
            return info.algorithm;
        }
    }
    std::string known;
    for (const auto& info : kAlgorithmNames) {
        known += known.empty() ? "" : ", ";
        known += info.name;
    }
    throw ParameterError("unknown algorithm '" + std::string(name) + "' (known: " + known + ")");
}

std::string format_params(const ParamMap& params) {
    std::string out;
    for (const auto& [key, value] : params) {
        if (!out.empty()) {
            out += ';';
        }
        out += key + "=" + format_number(value);
    }
    return out;
}

ParamMap parse_params(std::string_view text) {
    ParamMap out;
    while (!text.empty()) {
        const auto end = text.find_first_of(";,");
        const std::string_view item = text.substr(0, end);
        text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
        if (item.empty()) {
            continue;
        }
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw ParameterError("parameter '" + std::string(item) + "' is not key=value");
        }
        const std::string_view value = item.substr(eq + 1);
        double v = 0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(v)) {
            throw ParameterError("parameter '" + std::string(item) + "' has a non-numeric value");
        }
        out[std::string(item.substr(0, eq))] = v;
    }
    return out;
}

ParamMap merge_params(const ParamMap& defaults, const ParamMap& given, std::string_view owner) {
    ParamMap out = defaults;
    for (const auto& [key, value] : given) {
        if (!defaults.contains(key)) {
            std::string known;
            for (const auto& [k, v] : defaults) {
                known += known.empty() ? "" : ", ";
                known += k;
            }
            throw ParameterError("unknown parameter '" + key + "' for " + std::string(owner) +
                                 (known.empty() ? " (takes none)" : " (known: " + known + ")"));
        }
        out[key] = value;
    }
    return out;
}

StrategyIndex::StrategyIndex(std::shared_ptr<const Dataset> data, Metric metric, ParamMap params)
        : data_(std::move(data)), metric_(metric), params_(std::move(params)), labels_(data_->all_labels()) {}

bool StrategyIndex::supports(Constraint) const {
    return true;
}

std::vector<std::uint32_t> StrategyIndex::default_sweep() const {
    return {10, 20, 40, 80, 160, 320};
}

FilterBitmap StrategyIndex::make_bitmap(const FilteredQuery& query) const {
    return filter_map(labels_, query.labels, query.constraint, data_->all_labels());
}

void StrategyIndex::validate(const FilteredQuery& query) const {
    if (!supports(query.constraint)) {
        throw UnsupportedError(std::string(to_string(algorithm())) + " does not support the " +
                               std::string(to_string(query.constraint)) + " scenario");
    }
    if (query.embedding.size() != data_->dim()) {
        throw ParameterError("query dimension " + std::to_string(query.embedding.size()) +
                             " does not match index dimension " + std::to_string(data_->dim()));
    }
    if (query.k == 0) {
        throw ParameterError("k must be >= 1");
    }
    check_constraint(*data_, query.labels, query.constraint);
}

ParamMap default_params(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::BruteForce:
            return {};
        case Algorithm::PostFilterHnsw:
            return {{"M", 16}, {"ef_construction", 100}, {"l_max", 0}};
        case Algorithm::PostFilterIvfPq:
            return {{"nlist", 64}, {"m", 0}, {"rerank", 4}, {"full_rerank", 0}};
        case Algorithm::AcornGamma:
            return {{"M", 16}, {"gamma", 4}, {"ef_construction", 0}, {"min_selectivity", -1}};
        case Algorithm::AcornOne:
            return {{"M", 16}, {"ef_construction", 100}, {"min_selectivity", -1}};
        case Algorithm::Ung:
            return {{"R", 32}, {"L", 64}, {"alpha", 1.2}, {"cross", 3}};
        case Algorithm::FilteredVamana:
            return {{"R", 32}, {"L", 64}, {"alpha", 1.2}};
        case Algorithm::StitchedVamana:
            return {{"R_small", 24}, {"L_small", 64}, {"R_stitched", 48}, {"alpha", 1.2}};
        case Algorithm::Nhq:
            return {{"K", 24}, {"iterations", 8}, {"diversify", 8}, {"lambda", -1}, {"seeds", 64}};
        case Algorithm::Caps:
            return {{"clusters", 32}, {"h", 8}};
    }
    return {};
}

std::unique_ptr<StrategyIndex> build_index(Algorithm algorithm,
                                           std::shared_ptr<const Dataset> data,
                                           const ParamMap& given,
                                           const BuildOptions& options) {
    if (!data || data->empty()) {
        throw ParameterError("cannot build an index over an empty dataset");
    }
    const ParamMap params = merge_params(default_params(algorithm), given, to_string(algorithm));
    const Metric metric = options.metric;
    const auto seed = options.seed;
    const int threads = std::max(options.threads, 1);
    switch (algorithm) {
        case Algorithm::BruteForce:
            return std::make_unique<BruteForceIndex>(data, metric, params);
        case Algorithm::PostFilterHnsw:
            return std::make_unique<PostFilterHnswIndex>(data, metric, params, seed, threads);
        case Algorithm::PostFilterIvfPq:
            return std::make_unique<PostFilterIvfPqIndex>(data, metric, params, seed, threads);
        case Algorithm::AcornGamma:
        case Algorithm::AcornOne:
            return std::make_unique<AcornIndex>(algorithm, data, metric, params, seed, threads);
        case Algorithm::Ung:
            return std::make_unique<UngIndex>(data, metric, params, seed);
        case Algorithm::FilteredVamana:
        case Algorithm::StitchedVamana:
            return std::make_unique<LabelVamanaIndex>(algorithm, data, metric, params, seed);
        case Algorithm::Nhq:
            return std::make_unique<NhqIndex>(data, metric, params, seed);
        case Algorithm::Caps:
            return std::make_unique<CapsIndex>(data, metric, params, seed, threads);
    }
    throw ParameterError("unknown algorithm");
}

std::vector<std::uint8_t> serialize_index(const StrategyIndex& index) {
    nlohmann::json meta;
    meta["kind"] = "fanns-index";
    meta["algorithm"] = std::string(to_string(index.algorithm()));
    meta["metric"] = std::string(to_string(index.metric()));
    meta["params"] = format_params(index.params());
    meta["n"] = index.data().size();
    meta["dim"] = index.data().dim();
    BinaryWriter payload;
    save_dataset(payload, index.data());
    index.save_payload(payload);
    return encode_container(meta.dump(), payload.take());
}

std::unique_ptr<StrategyIndex> deserialize_index(const std::vector<std::uint8_t>& bytes) {
    Container container = decode_container(bytes);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(container.metadata);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("index metadata is not valid JSON: ") + e.what());
    }
    if (!meta.is_object() || meta.value("kind", "") != "fanns-index") {
        throw FormatError("container does not hold a search index");
    }
    Algorithm algorithm;
    Metric metric;
    ParamMap params;
    try {
        algorithm = parse_algorithm(meta.at("algorithm").get<std::string>());
        metric = parse_metric(meta.at("metric").get<std::string>());
        params = merge_params(default_params(algorithm), parse_params(meta.at("params").get<std::string>()),
                              to_string(algorithm));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("index metadata is incomplete: ") + e.what());
    } catch (const ParameterError& e) {
        throw FormatError(std::string("index metadata is invalid: ") + e.what());
    }

    BinaryReader in(std::move(container.payload));
    auto data = std::make_shared<const Dataset>(load_dataset(in));
    std::unique_ptr<StrategyIndex> index;
    switch (algorithm) {
        case Algorithm::BruteForce:
            index = std::make_unique<BruteForceIndex>(data, metric, params);
            break;
        case Algorithm::PostFilterHnsw:
            index = detail::load_postfilter_hnsw(in, data, metric, params);
            break;
        case Algorithm::PostFilterIvfPq:
            index = detail::load_postfilter_ivfpq(in, data, metric, params);
            break;
        case Algorithm::AcornGamma:
            index = detail::load_acorn_gamma(in, data, metric, params);
            break;
        case Algorithm::AcornOne:
            index = detail::load_acorn_one(in, data, metric, params);
            break;
        case Algorithm::Ung:
            index = detail::load_ung(in, data, metric, params);
            break;
        case Algorithm::FilteredVamana:
            index = detail::load_filtered_vamana(in, data, metric, params);
            break;
        case Algorithm::StitchedVamana:
            index = detail::load_stitched_vamana(in, data, metric, params);
            break;
        case Algorithm::Nhq:
            index = detail::load_nhq(in, data, metric, params);
            break;
        case Algorithm::Caps:
            index = detail::load_caps(in, data, metric, params);
            break;
    }
    if (!in.at_end()) {
        in.fail("trailing bytes after the index payload");
    }
    return index;
}

BruteForceIndex::BruteForceIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params)
        : StrategyIndex(std::move(data), metric, params) {}

SearchOutput BruteForceIndex::search(const FilteredQuery& query, std::uint32_t, const FilterBitmap* bitmap) const {
    validate(query);
    FilterBitmap local;
    if (!bitmap) {
        local = make_bitmap(query);
        bitmap = &local;
    }
    SearchOutput out;
    out.neighbors = exact_knn_in_bitmap(*data_, *bitmap, query.embedding, query.k, metric_).neighbors;
    out.distance_evals = bitmap->count();
    return out;
}

namespace detail {

void save_adjacency(BinaryWriter& out, const Adjacency& adjacency) {
    out.put<std::uint64_t>(adjacency.size());
    for (const auto& list : adjacency) {
        out.put_vector(list);
    }
}

Adjacency load_adjacency(BinaryReader& in, std::size_t n) {
    const auto size = in.get<std::uint64_t>();
    if (size != n) {
        in.fail("adjacency has " + std::to_string(size) + " lists for " + std::to_string(n) + " records");
    }
    Adjacency adj(n);
    for (auto& list : adj) {
        list = in.get_vector<idx_t>();
        for (idx_t v : list) {
            if (v >= n) {
                in.fail("adjacency id out of range");
            }
        }
    }
    return adj;
}

std::vector<Neighbor> top_k(std::vector<Neighbor> candidates, std::size_t k) {
    std::sort(candidates.begin(), candidates.end(), closer);
    std::vector<Neighbor> out;
    for (const auto& c : candidates) {
        if (out.size() >= k) {
            break;
        }
        if (std::none_of(out.begin(), out.end(), [&](const Neighbor& o) { return o.id == c.id; })) {
            out.push_back(c);
        }
    }
    return out;
}

int param_int(const ParamMap& params, const std::string& key) {
    const double v = params.at(key);
    if (v != std::floor(v) || v < -2e9 || v > 2e9) {
        throw ParameterError("parameter " + key + " must be an integer");
    }
    return int(v);
}

}  // namespace detail

}  // namespace fanns
