#include <algorithm>
#include <map>
#include <numeric>

#include "fanns/distance.h"
#include "strategy_internal.h"

namespace fanns {

using detail::param_int;

std::optional<std::uint32_t> LabelNavGraph::find(const LabelSet& s) const {
    const auto it = std::lower_bound(sets.begin(), sets.end(), s);
    if (it == sets.end() || *it != s) {
        return std::nullopt;
    }
    return std::uint32_t(it - sets.begin());
}

std::size_t LabelNavGraph::edge_count() const {
    std::size_t total = 0;
    for (const auto& c : children) {
        total += c.size();
    }
    return total;
}

LabelNavGraph group_by_label_set(std::span<const LabelSet> labels) {
    std::map<LabelSet, std::vector<idx_t>> groups;
    for (idx_t i = 0; i < labels.size(); ++i) {
        groups[labels[i]].push_back(i);
    }
    LabelNavGraph lng;
    for (auto& [set, members] : groups) {
        lng.sets.push_back(set);
        lng.members.push_back(std::move(members));
    }
    lng.children.assign(lng.sets.size(), {});
    lng.parents.assign(lng.sets.size(), {});
    return lng;
}

void build_lng(LabelNavGraph& lng) {
    const std::size_t g = lng.sets.size();
    lng.children.assign(g, {});
    lng.parents.assign(g, {});
    std::vector<std::uint32_t> by_size(g);
    std::iota(by_size.begin(), by_size.end(), 0u);
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return lng.sets[a].size() < lng.sets[b].size(); });
    for (std::uint32_t a = 0; a < g; ++a) {
        // strict supersets of a, by ascending size
        std::vector<std::uint32_t> supers;
        for (std::uint32_t b : by_size) {
            if (lng.sets[b].size() > lng.sets[a].size() && lng.sets[a].is_subset_of(lng.sets[b])) {
                supers.push_back(b);
            }
        }
        for (std::size_t i = 0; i < supers.size(); ++i) {
            const LabelSet& b = lng.sets[supers[i]];
            bool minimal = true;
            for (std::size_t j = 0; j < i && minimal; ++j) {
                const LabelSet& c = lng.sets[supers[j]];
                minimal = !(c.size() < b.size() && c.is_subset_of(b));
            }
            if (minimal) {
                lng.children[a].push_back(supers[i]);
                lng.parents[supers[i]].push_back(a);
            }
        }
    }
    for (auto& list : lng.children) {
        std::sort(list.begin(), list.end());
    }
    for (auto& list : lng.parents) {
        std::sort(list.begin(), list.end());
    }
}

UngIndex::UngIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed)
        : StrategyIndex(std::move(data), metric, params) {
    const int R = param_int(params_, "R");
    const int L = param_int(params_, "L");
    const int cross = param_int(params_, "cross");
    if (R < 1 || L < R || cross < 1) {
        throw ParameterError("ung needs R >= 1, L >= R and cross >= 1");
    }
    lng_ = group_by_label_set(data_->all_labels());
    build_lng(lng_);
    const std::size_t groups = lng_.sets.size();
    group_of_.assign(data_->size(), 0);
    for (std::uint32_t g = 0; g < groups; ++g) {
        for (idx_t id : lng_.members[g]) {
            group_of_[id] = g;
        }
    }

    PruneParams pp;
    pp.alpha = float(params_.at("alpha"));
    pp.degree = std::uint32_t(R);
    pp.build_beam = std::uint32_t(L);
    adjacency_.assign(data_->size(), {});
    group_entries_.assign(groups, 0);
    std::vector<VamanaGraph> local(groups);
    for (std::uint32_t g = 0; g < groups; ++g) {
        const auto& members = lng_.members[g];
        local[g] = build_vamana(*data_, members, pp, metric_, seed + g);
        group_entries_[g] = members[local[g].medoid];
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (idx_t j : local[g].adjacency[i]) {
                adjacency_[members[i]].push_back(members[j]);
            }
        }
    }

    // vector-level edges along every minimal containment edge
    const std::size_t dim = data_->dim();
    for (std::uint32_t a = 0; a < groups; ++a) {
        for (std::uint32_t b : lng_.children[a]) {
            const auto& targets = lng_.members[b];
            const std::size_t c = std::min<std::size_t>(std::size_t(cross), targets.size());
            for (idx_t u : lng_.members[a]) {
                const auto q = data_->vector(u);
                std::vector<Neighbor> near;
                if (targets.size() <= 64) {
                    for (idx_t t : targets) {
                        near.push_back({t, distance_unchecked(metric_, q.data(), data_->vector(t).data(), dim)});
                    }
                    near = detail::top_k(std::move(near), c);
                } else {
                    auto dist = [&](idx_t local_id) {
                        return distance_unchecked(metric_, q.data(), data_->vector(targets[local_id]).data(), dim);
                    };
                    const idx_t entry[] = {local[b].medoid};
                    BeamParams beam;
                    beam.beam_width = std::uint32_t(std::max<std::size_t>(2 * c, 16));
                    near = beam_search(AdjacencyView{&local[b].adjacency}, entry, dist, AlwaysTrue{}, AlwaysTrue{}, beam);
                    near.resize(std::min(near.size(), c));
                    for (auto& nb : near) {
                        nb.id = targets[nb.id];
                    }
                }
                for (const auto& nb : near) {
                    adjacency_[u].push_back(nb.id);
                }
            }
        }
    }
}

UngIndex::UngIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, Adjacency adjacency,
                   std::vector<idx_t> group_entries)
        : StrategyIndex(std::move(data), metric, params),
          adjacency_(std::move(adjacency)),
          group_entries_(std::move(group_entries)) {
    lng_ = group_by_label_set(data_->all_labels());
    build_lng(lng_);
    group_of_.assign(data_->size(), 0);
    for (std::uint32_t g = 0; g < lng_.sets.size(); ++g) {
        for (idx_t id : lng_.members[g]) {
            group_of_[id] = g;
        }
    }
    if (group_entries_.size() != lng_.sets.size()) {
        throw FormatError("UNG group entry count does not match the dataset's label sets");
    }
    for (std::uint32_t g = 0; g < group_entries_.size(); ++g) {
        if (group_entries_[g] >= data_->size() || group_of_[group_entries_[g]] != g) {
            throw FormatError("UNG group entry is not a member of its group");
        }
    }
}

std::size_t UngIndex::cross_edge_count() const {
    std::size_t total = 0;
    for (idx_t v = 0; v < adjacency_.size(); ++v) {
        for (idx_t u : adjacency_[v]) {
            total += group_of_[u] != group_of_[v];
        }
    }
    return total;
}

std::vector<std::uint32_t> UngIndex::entry_groups(const LabelSet& labels) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t g = 0; g < lng_.sets.size(); ++g) {
        if (!labels.is_subset_of(lng_.sets[g])) {
            continue;
        }
        const bool minimal = std::none_of(lng_.parents[g].begin(), lng_.parents[g].end(),
                                          [&](std::uint32_t p) { return labels.is_subset_of(lng_.sets[p]); });
        if (minimal) {
            out.push_back(g);
        }
    }
    return out;
}

std::vector<Neighbor> UngIndex::traverse(std::span<const float> query, std::span<const std::uint32_t> groups,
                                         std::uint32_t l, SearchOutput& out, bool restrict_to_group) const {
    if (groups.empty()) {
        return {};
    }
    std::vector<idx_t> entries;
    for (std::uint32_t g : groups) {
        entries.push_back(group_entries_[g]);
    }
    const QueryDistance dist(*data_, query, metric_);
    BeamParams beam;
    beam.beam_width = l;
    SearchStats stats;
    std::vector<Neighbor> found;
    if (restrict_to_group) {
        const std::uint32_t g = groups.front();
        auto same_group = [&](idx_t v) { return group_of_[v] == g; };
        found = beam_search(AdjacencyView{&adjacency_}, entries, dist, same_group, AlwaysTrue{}, beam, &stats);
    } else {
        found = beam_search(AdjacencyView{&adjacency_}, entries, dist, AlwaysTrue{}, AlwaysTrue{}, beam, &stats);
    }
    out.distance_evals += stats.distance_evals;
    return found;
}

SearchOutput UngIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap*) const {
    validate(query);
    const std::uint32_t l = std::max(knob, query.k);
    SearchOutput out;
    out.final_scope = l;
    switch (query.constraint) {
        case Constraint::Containment: {
            const auto groups = entry_groups(query.labels);
            out.neighbors = detail::top_k(traverse(query.embedding, groups, l, out, false), query.k);
            break;
        }
        case Constraint::Equality:
        case Constraint::FixedLengthEquality: {
            const auto g = lng_.find(query.labels);
            if (g) {
                const std::uint32_t groups[] = {*g};
                out.neighbors = detail::top_k(traverse(query.embedding, groups, l, out, true), query.k);
            }
            break;
        }
        case Constraint::Overlap: {
            std::vector<Neighbor> merged;
            out.rounds = 0;
            for (label_t x : query.labels) {
                ++out.rounds;
                const auto groups = entry_groups(LabelSet{x});
                const auto found = traverse(query.embedding, groups, l, out, false);
                merged.insert(merged.end(), found.begin(), found.end());
            }
            out.neighbors = detail::top_k(std::move(merged), query.k);
            break;
        }
    }
    return out;
}

void UngIndex::save_payload(BinaryWriter& out) const {
    detail::save_adjacency(out, adjacency_);
    out.put_vector(group_entries_);
}

namespace detail {

std::unique_ptr<StrategyIndex> load_ung(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                        const ParamMap& params) {
    auto adjacency = load_adjacency(in, data->size());
    auto entries = in.get_vector<idx_t>();
    return std::make_unique<UngIndex>(std::move(data), metric, params, std::move(adjacency), std::move(entries));
}

}  // namespace detail

}  // namespace fanns
