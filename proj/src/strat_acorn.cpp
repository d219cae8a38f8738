#include <algorithm>

#include "fanns/distance.h"
#include "fanns/exact_oracle.h"
#include "strategy_internal.h"

namespace fanns {

using detail::param_int;

LayeredParams AcornIndex::layered_params(Algorithm variant, const ParamMap& params, std::uint64_t seed, int threads) {
    LayeredParams lp;
    lp.M = std::uint32_t(param_int(params, "M"));
    lp.seed = seed;
    lp.threads = threads;
    const int ef = param_int(params, "ef_construction");
    if (variant == Algorithm::AcornOne) {
        lp.selection = NeighborSelection::Densified;
        lp.degree0 = 2 * lp.M;
        lp.base_degree = lp.M;
        lp.ef_construction = std::uint32_t(std::max(ef, 1));
        return lp;
    }
    const int gamma = param_int(params, "gamma");
    if (gamma < 1) {
        throw ParameterError("gamma must be >= 1");
    }
    lp.selection = NeighborSelection::Densified;
    lp.degree0 = std::uint32_t(gamma) * lp.M;
    lp.base_degree = lp.M;
    lp.ef_construction = ef > 0 ? std::uint32_t(ef) : std::max<std::uint32_t>(100, lp.degree0);
    return lp;
}

AcornIndex::AcornIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                       std::uint64_t seed, int threads)
        : StrategyIndex(std::move(data), metric, params), variant_(variant) {
    // the builder sees embeddings only
    const Dataset vectors(data_->dim(), std::vector<float>(data_->values().begin(), data_->values().end()),
                          std::vector<LabelSet>(data_->size()));
    graph_ = build_layered_graph(vectors, layered_params(variant_, params_, seed, threads), metric_);
}

AcornIndex::AcornIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                       ProximityGraph graph)
        : StrategyIndex(std::move(data), metric, params), variant_(variant), graph_(std::move(graph)) {}

SearchOutput AcornIndex::search_with(const FilteredQuery& query, std::uint32_t l, const FilterBitmap& bitmap,
                                     HopMode mode) const {
    SearchOutput out;
    out.final_scope = std::max(l, query.k);
    if (bitmap.count() == 0) {
        return out;
    }
    const QueryDistance dist(*data_, query.embedding, metric_);
    auto pred = [&](idx_t v) { return bitmap.test(v); };
    BeamParams beam;
    beam.beam_width = out.final_scope;
    beam.hop_mode = mode;
    SearchStats stats;
    out.neighbors = search_layered(graph_, dist, pred, pred, beam, &stats);
    out.distance_evals = stats.distance_evals;
    out.label_checks = stats.traverse_checks;
    if (out.neighbors.size() > query.k) {
        out.neighbors.resize(query.k);
    }
    return out;
}

SearchOutput AcornIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const {
    validate(query);
    FilterBitmap local;
    if (!bitmap) {
        local = make_bitmap(query);
        bitmap = &local;
    }
    const bool one = variant_ == Algorithm::AcornOne;
    double threshold = params_.at("min_selectivity");
    if (threshold < 0) {
        threshold = one ? 1.0 / params_.at("M") : 1.0 / params_.at("gamma");
    }
    if (double(bitmap->count()) < threshold * double(data_->size())) {
        SearchOutput out;
        out.neighbors = exact_knn_in_bitmap(*data_, *bitmap, query.embedding, query.k, metric_).neighbors;
        out.distance_evals = bitmap->count();
        out.final_scope = 0;
        return out;
    }
    return search_with(query, knob, *bitmap, one ? HopMode::TwoHop : HopMode::OneHop);
}

void AcornIndex::save_payload(BinaryWriter& out) const {
    graph_.save(out);
}

namespace detail {

namespace {

std::unique_ptr<StrategyIndex> load_acorn(Algorithm variant, BinaryReader& in, std::shared_ptr<const Dataset> data,
                                          Metric metric, const ParamMap& params) {
    auto graph = ProximityGraph::load(in);
    if (graph.size() != data->size()) {
        in.fail("graph size does not match the dataset");
    }
    return std::make_unique<AcornIndex>(variant, std::move(data), metric, params, std::move(graph));
}

}  // namespace

std::unique_ptr<StrategyIndex> load_acorn_gamma(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                                const ParamMap& params) {
    return load_acorn(Algorithm::AcornGamma, in, std::move(data), metric, params);
}

std::unique_ptr<StrategyIndex> load_acorn_one(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                              const ParamMap& params) {
    return load_acorn(Algorithm::AcornOne, in, std::move(data), metric, params);
}

}  // namespace detail

}  // namespace fanns
