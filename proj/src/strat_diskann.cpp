#include <algorithm>

#include "fanns/distance.h"
#include "strategy_internal.h"

namespace fanns {

using detail::param_int;

namespace {

/// labels(p) ∩ labels(victim) ⊆ labels(kept)
bool label_prunable(const LabelSet& p, const LabelSet& kept, const LabelSet& victim) {
    for (label_t x : victim) {
        if (p.contains(x) && !kept.contains(x)) {
            return false;
        }
    }
    return true;
}

}  // namespace

LabelVamanaIndex::LabelVamanaIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric,
                                   const ParamMap& params, std::uint64_t seed)
        : StrategyIndex(std::move(data), metric, params), variant_(variant) {
    if (params_.at("alpha") < 1.0) {
        throw ParameterError("alpha must be >= 1");
    }
    if (variant_ == Algorithm::FilteredVamana) {
        build_filtered(seed);
    } else {
        build_stitched(seed);
    }
}

LabelVamanaIndex::LabelVamanaIndex(Algorithm variant, std::shared_ptr<const Dataset> data, Metric metric,
                                   const ParamMap& params, Adjacency adjacency, std::vector<idx_t> start_points)
        : StrategyIndex(std::move(data), metric, params),
          variant_(variant),
          adjacency_(std::move(adjacency)),
          start_points_(std::move(start_points)) {
    for (idx_t s : start_points_) {
        if (s != kNoStart && s >= data_->size()) {
            throw FormatError("start point out of range");
        }
    }
}

void LabelVamanaIndex::build_filtered(std::uint64_t seed) {
    const int R = param_int(params_, "R");
    const int L = param_int(params_, "L");
    if (R < 1 || L < R) {
        throw ParameterError("filtered-vamana needs R >= 1 and L >= R");
    }
    const Dataset& data = *data_;
    start_points_.assign(data.label_universe(), kNoStart);
    for (label_t x = 0; x < data.label_universe(); ++x) {
        const auto members = labels_.bitset(x).positions();
        if (!members.empty()) {
            start_points_[x] = members[approximate_medoid(data, members, metric_)];
        }
    }

    VamanaHooks hooks;
    hooks.admit = [&](idx_t p, idx_t x) { return data.labels(p).intersects(data.labels(x)); };
    hooks.can_prune = [&](idx_t p, idx_t kept, idx_t victim) {
        return label_prunable(data.labels(p), data.labels(kept), data.labels(victim));
    };
    hooks.entries = [&](idx_t p) {
        std::vector<idx_t> out;
        for (label_t x : data.labels(p)) {
            if (std::find(out.begin(), out.end(), start_points_[x]) == out.end()) {
                out.push_back(start_points_[x]);
            }
        }
        return out;
    };
    PruneParams pp;
    pp.alpha = float(params_.at("alpha"));
    pp.degree = std::uint32_t(R);
    pp.build_beam = std::uint32_t(L);
    adjacency_ = build_vamana(data, {}, pp, metric_, seed, hooks).adjacency;
}

void LabelVamanaIndex::build_stitched(std::uint64_t seed) {
    const int r_small = param_int(params_, "R_small");
    const int l_small = param_int(params_, "L_small");
    const int r_stitched = param_int(params_, "R_stitched");
    if (r_small < 1 || r_stitched < 1 || l_small < 1) {
        throw ParameterError("stitched-vamana needs R_small, L_small and R_stitched >= 1");
    }
    const Dataset& data = *data_;
    PruneParams pp;
    pp.alpha = float(params_.at("alpha"));
    pp.degree = std::uint32_t(r_small);
    pp.build_beam = std::uint32_t(std::max(l_small, r_small));

    start_points_.assign(data.label_universe(), kNoStart);
    adjacency_.assign(data.size(), {});
    for (label_t x = 0; x < data.label_universe(); ++x) {
        LabelSubgraph sub;
        sub.label = x;
        sub.members = labels_.bitset(x).positions();
        if (sub.members.empty()) {
            continue;
        }
        const auto g = build_vamana(data, sub.members, pp, metric_, seed + x);
        start_points_[x] = sub.members[g.medoid];
        sub.adjacency.resize(sub.members.size());
        for (std::size_t i = 0; i < sub.members.size(); ++i) {
            for (idx_t j : g.adjacency[i]) {
                sub.adjacency[i].push_back(sub.members[j]);
                adjacency_[sub.members[i]].push_back(sub.members[j]);
            }
        }
        subgraphs_.push_back(std::move(sub));
    }

    const std::size_t dim = data.dim();
    auto pair_distance = [&](idx_t a, idx_t b) {
        return distance_unchecked(metric_, data.vector(a).data(), data.vector(b).data(), dim);
    };
    for (idx_t v = 0; v < data.size(); ++v) {
        auto& list = adjacency_[v];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        if (list.size() <= std::size_t(r_stitched)) {
            continue;
        }
        std::vector<Neighbor> pool;
        for (idx_t u : list) {
            pool.push_back({u, pair_distance(v, u)});
        }
        list = robust_prune(std::move(pool), v, pp.alpha, std::size_t(r_stitched), pair_distance,
                            [&](idx_t kept, idx_t victim) {
                                return label_prunable(data.labels(v), data.labels(kept), data.labels(victim));
                            });
    }
}

SearchOutput LabelVamanaIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap*) const {
    validate(query);
    const Dataset& data = *data_;
    const LabelSet& f = query.labels;
    SearchOutput out;
    out.final_scope = std::max(knob, query.k);

    std::vector<idx_t> entries;
    auto add_entry = [&](label_t x) {
        if (x < start_points_.size() && start_points_[x] != kNoStart &&
            std::find(entries.begin(), entries.end(), start_points_[x]) == entries.end()) {
            entries.push_back(start_points_[x]);
        }
    };
    if (f.empty()) {
        if (query.constraint == Constraint::Containment) {
            for (label_t x = 0; x < start_points_.size(); ++x) {
                add_entry(x);
            }
        }
    } else {
        for (label_t x : f) {
            add_entry(x);
        }
    }
    if (entries.empty()) {
        return out;
    }

    std::size_t checks = 0;
    auto expand = [&](idx_t v) {
        ++checks;
        return f.empty() || data.labels(v).intersects(f);
    };
    auto accept = [&](idx_t v) {
        ++checks;
        return satisfies(data.labels(v), f, query.constraint);
    };
    const QueryDistance dist(data, query.embedding, metric_);
    BeamParams beam;
    beam.beam_width = out.final_scope;
    SearchStats stats;
    out.neighbors = beam_search(AdjacencyView{&adjacency_}, entries, dist, expand, accept, beam, &stats);
    if (out.neighbors.size() > query.k) {
        out.neighbors.resize(query.k);
    }
    out.distance_evals = stats.distance_evals;
    out.label_checks = checks;
    return out;
}

void LabelVamanaIndex::save_payload(BinaryWriter& out) const {
    detail::save_adjacency(out, adjacency_);
    out.put_vector(start_points_);
}

namespace detail {

namespace {

std::unique_ptr<StrategyIndex> load_label_vamana(Algorithm variant, BinaryReader& in, std::shared_ptr<const Dataset> data,
                                                 Metric metric, const ParamMap& params) {
    auto adjacency = load_adjacency(in, data->size());
    auto starts = in.get_vector<idx_t>();
    return std::make_unique<LabelVamanaIndex>(variant, std::move(data), metric, params, std::move(adjacency),
                                              std::move(starts));
}

}  // namespace

std::unique_ptr<StrategyIndex> load_filtered_vamana(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                                    const ParamMap& params) {
    return load_label_vamana(Algorithm::FilteredVamana, in, std::move(data), metric, params);
}

std::unique_ptr<StrategyIndex> load_stitched_vamana(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                                    const ParamMap& params) {
    return load_label_vamana(Algorithm::StitchedVamana, in, std::move(data), metric, params);
}

}  // namespace detail

}  // namespace fanns
