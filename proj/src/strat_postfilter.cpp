#include <algorithm>

#include "fanns/distance.h"
#include "strategy_internal.h"

namespace fanns {

using detail::param_int;

namespace {

LayeredParams hnsw_params(const ParamMap& params, std::uint64_t seed, int threads) {
    LayeredParams lp;
    lp.M = std::uint32_t(param_int(params, "M"));
    lp.ef_construction = std::uint32_t(std::max(param_int(params, "ef_construction"), 1));
    lp.degree0 = 2 * lp.M;
    lp.selection = NeighborSelection::Heuristic;
    lp.seed = seed;
    lp.threads = threads;
    return lp;
}

std::size_t auto_subspaces(std::size_t dim) {
    const std::size_t limit = std::max<std::size_t>(1, dim / 4);
    for (std::size_t m = limit; m > 1; --m) {
        if (dim % m == 0) {
            return m;
        }
    }
    return 1;
}

}  // namespace

PostFilterHnswIndex::PostFilterHnswIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                                         std::uint64_t seed, int threads)
        : StrategyIndex(std::move(data), metric, params) {
    if (param_int(params_, "l_max") < 0) {
        throw ParameterError("l_max must be >= 0");
    }
    graph_ = build_layered_graph(*data_, hnsw_params(params_, seed, threads), metric_);
}

PostFilterHnswIndex::PostFilterHnswIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                                         ProximityGraph graph)
        : StrategyIndex(std::move(data), metric, params), graph_(std::move(graph)) {}

SearchOutput PostFilterHnswIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const {
    validate(query);
    FilterBitmap local;
    if (!bitmap) {
        local = make_bitmap(query);
        bitmap = &local;
    }
    const std::size_t n = data_->size();
    const int cap = param_int(params_, "l_max");
    const std::uint32_t l_max = std::uint32_t(std::max<std::size_t>(cap > 0 ? std::size_t(cap) : n, 1));
    std::uint32_t l = std::min(std::max(knob, query.k), l_max);

    SearchOutput out;
    out.rounds = 0;
    const QueryDistance dist(*data_, query.embedding, metric_);
    std::vector<Neighbor> valid;
    for (;;) {
        ++out.rounds;
        BeamParams beam;
        beam.beam_width = l;
        SearchStats stats;
        const auto found = search_layered(graph_, dist, AlwaysTrue{}, AlwaysTrue{}, beam, &stats);
        out.distance_evals += stats.distance_evals;
        out.label_checks += found.size();
        valid.clear();
        for (const auto& nb : found) {
            if (bitmap->test(nb.id)) {
                valid.push_back(nb);
            }
        }
        if (valid.size() >= query.k || l >= l_max) {
            break;
        }
        l = std::min(2 * l, l_max);
    }
    out.final_scope = l;
    if (valid.size() > query.k) {
        valid.resize(query.k);
    }
    out.neighbors = std::move(valid);
    return out;
}

void PostFilterHnswIndex::save_payload(BinaryWriter& out) const {
    graph_.save(out);
}

PostFilterIvfPqIndex::PostFilterIvfPqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                                           std::uint64_t seed, int threads)
        : StrategyIndex(std::move(data), metric, params) {
    IvfPqParams ip;
    const int nlist = param_int(params_, "nlist");
    const int m = param_int(params_, "m");
    if (nlist < 1 || m < 0 || param_int(params_, "rerank") < 1) {
        throw ParameterError("postfilter-ivfpq needs nlist >= 1, m >= 0, rerank >= 1");
    }
    ip.nlist = std::min<std::size_t>(std::size_t(nlist), data_->size());
    ip.m = m == 0 ? auto_subspaces(data_->dim()) : std::size_t(m);
    ip.seed = seed;
    ip.threads = threads;
    ivf_ = IvfPqIndex::build(*data_, ip, metric_);
}

PostFilterIvfPqIndex::PostFilterIvfPqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params,
                                           IvfPqIndex ivf)
        : StrategyIndex(std::move(data), metric, params), ivf_(std::move(ivf)) {}

std::vector<std::uint32_t> PostFilterIvfPqIndex::default_sweep() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t p = 1; p < ivf_.nlist(); p *= 2) {
        out.push_back(p);
    }
    out.push_back(std::uint32_t(ivf_.nlist()));
    return out;
}

SearchOutput PostFilterIvfPqIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap* bitmap) const {
    validate(query);
    FilterBitmap local;
    if (!bitmap) {
        local = make_bitmap(query);
        bitmap = &local;
    }
    const std::uint32_t nlist = std::uint32_t(ivf_.nlist());
    std::uint32_t nprobe = std::clamp<std::uint32_t>(knob, 1, nlist);

    SearchOutput out;
    out.rounds = 0;
    std::vector<Neighbor> scanned;
    std::vector<Neighbor> valid;
    for (;;) {
        ++out.rounds;
        const auto lists = ivf_.nearest_lists(query.embedding, nprobe);
        scanned.clear();
        ivf_.scan(query.embedding, lists, nullptr, scanned);
        out.distance_evals += scanned.size();
        out.label_checks += scanned.size();
        valid.clear();
        for (const auto& nb : scanned) {
            if (bitmap->test(nb.id)) {
                valid.push_back(nb);
            }
        }
        if (valid.size() >= query.k || nprobe >= nlist) {
            break;
        }
        nprobe = std::min(2 * nprobe, nlist);
    }
    out.final_scope = nprobe;

    if (param_int(params_, "full_rerank") == 0) {
        const std::size_t keep = std::min(valid.size(), std::size_t(param_int(params_, "rerank")) * query.k);
        std::partial_sort(valid.begin(), valid.begin() + std::ptrdiff_t(keep), valid.end(), closer);
        valid.resize(keep);
    }
    const QueryDistance dist(*data_, query.embedding, metric_);
    for (auto& nb : valid) {
        nb.distance = dist(nb.id);
    }
    out.distance_evals += valid.size();
    out.neighbors = detail::top_k(std::move(valid), query.k);
    return out;
}

void PostFilterIvfPqIndex::save_payload(BinaryWriter& out) const {
    ivf_.save(out);
}

namespace detail {

std::unique_ptr<StrategyIndex> load_postfilter_hnsw(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                                    const ParamMap& params) {
    auto graph = ProximityGraph::load(in);
    if (graph.size() != data->size()) {
        in.fail("graph size does not match the dataset");
    }
    return std::make_unique<PostFilterHnswIndex>(std::move(data), metric, params, std::move(graph));
}

std::unique_ptr<StrategyIndex> load_postfilter_ivfpq(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                                     const ParamMap& params) {
    auto ivf = IvfPqIndex::load(in);
    if (ivf.size() != data->size()) {
        in.fail("IVF index size does not match the dataset");
    }
    return std::make_unique<PostFilterIvfPqIndex>(std::move(data), metric, params, std::move(ivf));
}

}  // namespace detail

}  // namespace fanns
