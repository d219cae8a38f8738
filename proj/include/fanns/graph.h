#pragma once

// Proximity-graph primitives shared by the graph strategies: adjacency
// storage, beam search with pluggable traversal and acceptance predicates,
// alpha pruning, and the layered / Vamana / kNN-graph builders.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "fanns/core.h"

namespace fanns {

class BinaryWriter;
class BinaryReader;

using Adjacency = std::vector<std::vector<idx_t>>;

/// Per-node neighbor lists on one or more layers. Layer 0 holds every node;
/// node v exists on layers 0..level(v).
class ProximityGraph {
public:
    ProximityGraph() = default;
    explicit ProximityGraph(std::size_t n) : links_(n, std::vector<std::vector<idx_t>>(1)) {}
    /// Single-layer graph from a flat adjacency.
    static ProximityGraph from_adjacency(Adjacency adjacency, std::vector<idx_t> entry_points);

    std::size_t size() const { return links_.size(); }
    int level(idx_t v) const { return int(links_[v].size()) - 1; }
    int max_level() const { return max_level_; }
    std::span<const idx_t> neighbors(idx_t v, int level = 0) const { return links_[v][std::size_t(level)]; }
    std::vector<idx_t>& mutable_neighbors(idx_t v, int level = 0) { return links_[v][std::size_t(level)]; }
    void set_level(idx_t v, int level) { links_[v].resize(std::size_t(level) + 1); }

    const std::vector<idx_t>& entry_points() const { return entry_points_; }
    void set_entry_points(std::vector<idx_t> entries) { entry_points_ = std::move(entries); }
    void set_max_level(int level) { max_level_ = level; }

    std::size_t max_degree(int level = 0) const;
    std::size_t edge_count(int level = 0) const;
    Adjacency layer(int level) const;

    void save(BinaryWriter& out) const;
    static ProximityGraph load(BinaryReader& in);

    friend bool operator==(const ProximityGraph&, const ProximityGraph&) = default;

private:
    std::vector<std::vector<std::vector<idx_t>>> links_;
    std::vector<idx_t> entry_points_;
    int max_level_ = 0;
};

/// Epoch-stamped visited flags, reusable across searches without clearing.
class VisitedSet {
public:
    void reset(std::size_t n) {
        if (marks_.size() < n) {
            marks_.assign(n, 0);
            epoch_ = 0;
        }
        if (++epoch_ == 0) {
            std::fill(marks_.begin(), marks_.end(), 0);
            epoch_ = 1;
        }
    }
    /// Marks v; returns true if it was already marked.
    bool test_and_set(idx_t v) {
        if (marks_[v] == epoch_) {
            return true;
        }
        marks_[v] = epoch_;
        return false;
    }
    bool test(idx_t v) const { return marks_[v] == epoch_; }

private:
    std::vector<std::uint32_t> marks_;
    std::uint32_t epoch_ = 0;
};

VisitedSet& thread_visited_set();

enum class HopMode : std::uint8_t { OneHop, TwoHop };

struct BeamParams {
    std::uint32_t beam_width = 10;
    HopMode hop_mode = HopMode::OneHop;
    /// Stop scanning an expansion after this many traversable nodes were
    /// found (0 = scan everything).
    std::uint32_t expansion_cap = 0;
};

struct SearchStats {
    std::size_t distance_evals = 0;
    std::size_t expansions = 0;
    std::size_t traverse_checks = 0;
    std::size_t accept_checks = 0;
};

/// Neighbor source over one layer of a ProximityGraph.
struct LayerView {
    const ProximityGraph* graph;
    int level = 0;

    std::size_t size() const { return graph->size(); }
    std::span<const idx_t> neighbors(idx_t v, std::vector<idx_t>&) const { return graph->neighbors(v, level); }
};

/// Neighbor source over a flat adjacency.
struct AdjacencyView {
    const Adjacency* adjacency;

    std::size_t size() const { return adjacency->size(); }
    std::span<const idx_t> neighbors(idx_t v, std::vector<idx_t>&) const { return (*adjacency)[v]; }
};

struct AlwaysTrue {
    bool operator()(idx_t) const { return true; }
};

/// Best-first beam search.
///
/// Entry points are always evaluated. Any other node is distance-evaluated
/// only if `traverse(v)` holds; evaluated nodes enter the candidate heap, and
/// those that also pass `accept(v)` enter the result list (capacity
/// beam_width). With TwoHop, a neighbor of u failing `traverse` is a bridge:
/// its own neighbors are scanned too. Failing nodes are never marked
/// visited, so they can bridge again from later expansions. Search
/// stops when the best unexpanded candidate is farther than the worst of a
/// full result list. Returns accepted nodes ascending by (distance, id).
/// If `expanded` is non-null it receives every expanded node.
template <class Source, class Distance, class Traverse, class Accept>
std::vector<Neighbor> beam_search(const Source& source,
                                  std::span<const idx_t> entries,
                                  Distance&& dist,
                                  Traverse&& traverse,
                                  Accept&& accept,
                                  const BeamParams& params,
                                  SearchStats* stats = nullptr,
                                  std::vector<Neighbor>* expanded = nullptr) {
    const std::size_t width = std::max<std::uint32_t>(params.beam_width, 1);
    VisitedSet& visited = thread_visited_set();
    visited.reset(source.size());

    auto farther = [](const Neighbor& a, const Neighbor& b) { return closer(b, a); };
    auto nearer_last = [](const Neighbor& a, const Neighbor& b) { return closer(a, b); };
    // candidates: min-heap; results: max-heap on (distance, id)
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(farther)> candidates(farther);
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(nearer_last)> results(nearer_last);

    SearchStats local;
    auto consider = [&](idx_t v) {
        const Neighbor nb{v, dist(v)};
        ++local.distance_evals;
        const bool full = results.size() >= width;
        if (!full || closer(nb, results.top())) {
            candidates.push(nb);
            ++local.accept_checks;
            if (accept(v)) {
                results.push(nb);
                if (results.size() > width) {
                    results.pop();
                }
            }
        }
    };

    for (idx_t e : entries) {
        if (!visited.test_and_set(e)) {
            consider(e);
        }
    }

    std::vector<idx_t> scratch1;
    std::vector<idx_t> scratch2;
    while (!candidates.empty()) {
        const Neighbor current = candidates.top();
        if (results.size() >= width && closer(results.top(), current)) {
            break;
        }
        candidates.pop();
        ++local.expansions;
        if (expanded) {
            expanded->push_back(current);
        }
        std::size_t found = 0;
        const bool capped = params.expansion_cap > 0;
        const auto first = source.neighbors(current.id, scratch1);
        if constexpr (requires { dist.prefetch(idx_t{}); }) {
            for (idx_t a : first) {
                dist.prefetch(a);
            }
        }
        if (params.hop_mode == HopMode::OneHop) {
            for (idx_t a : first) {
                if (capped && found >= params.expansion_cap) {
                    break;
                }
                if (visited.test_and_set(a)) {
                    continue;
                }
                ++local.traverse_checks;
                if (traverse(a)) {
                    consider(a);
                    ++found;
                }
            }
        } else {
            // only passing nodes are marked, so a failing node can bridge
            // again from a later expansion
            auto visit = [&](idx_t v) {
                if (visited.test(v)) {
                    return true;
                }
                ++local.traverse_checks;
                if (!traverse(v)) {
                    return false;
                }
                visited.test_and_set(v);
                consider(v);
                ++found;
                return true;
            };
            for (idx_t a : first) {
                if (capped && found >= params.expansion_cap) {
                    break;
                }
                if (visit(a)) {
                    continue;
                }
                for (idx_t b : source.neighbors(a, scratch2)) {
                    if (capped && found >= params.expansion_cap) {
                        break;
                    }
                    visit(b);
                }
            }
        }
    }

    std::vector<Neighbor> out(results.size());
    for (std::size_t i = results.size(); i-- > 0;) {
        out[i] = results.top();
        results.pop();
    }
    if (stats) {
        stats->distance_evals += local.distance_evals;
        stats->expansions += local.expansions;
        stats->traverse_checks += local.traverse_checks;
        stats->accept_checks += local.accept_checks;
    }
    return out;
}

/// Greedy descent through the upper layers of a layered graph; returns the
/// layer-0 entry node.
template <class Distance>
idx_t descend_upper_layers(const ProximityGraph& graph, Distance&& dist) {
    idx_t current = graph.entry_points().front();
    float best = dist(current);
    for (int level = graph.max_level(); level > 0; --level) {
        bool moved = true;
        while (moved) {
            moved = false;
            for (idx_t nb : graph.neighbors(current, level)) {
                const float d = dist(nb);
                if (d < best || (d == best && nb < current)) {
                    best = d;
                    current = nb;
                    moved = true;
                }
            }
        }
    }
    return current;
}

/// Upper-layer greedy descent followed by a layer-0 beam search.
template <class Distance, class Traverse, class Accept>
std::vector<Neighbor> search_layered(const ProximityGraph& graph,
                                     Distance&& dist,
                                     Traverse&& traverse,
                                     Accept&& accept,
                                     const BeamParams& params,
                                     SearchStats* stats = nullptr) {
    if (graph.size() == 0) {
        return {};
    }
    const idx_t entry = descend_upper_layers(graph, dist);
    const idx_t entries[] = {entry};
    return beam_search(LayerView{&graph, 0}, entries, dist, traverse, accept, params, stats);
}

struct PruneParams {
    float alpha = 1.2f;
    std::uint32_t degree = 32;     // R
    std::uint32_t build_beam = 64; // L_build
};

/// Alpha pruning.
///
/// Candidates carry their distance to the node being pruned. Repeatedly keeps
/// the closest remaining candidate c and discards every c' with
/// alpha * d(c, c') <= d(node, c'), but only where `can_prune(c, c')` holds.
/// Duplicate ids and `self` are dropped. Returns at most `degree` ids.
template <class PairDistance, class CanPrune>
std::vector<idx_t> robust_prune(std::vector<Neighbor> candidates,
                                idx_t self,
                                float alpha,
                                std::size_t degree,
                                PairDistance&& pair_distance,
                                CanPrune&& can_prune) {
    std::sort(candidates.begin(), candidates.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.id < b.id || (a.id == b.id && a.distance < b.distance);
    });
    candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                 [](const Neighbor& a, const Neighbor& b) { return a.id == b.id; }),
                     candidates.end());
    std::erase_if(candidates, [self](const Neighbor& c) { return c.id == self; });
    std::sort(candidates.begin(), candidates.end(), closer);

    std::vector<idx_t> kept;
    std::vector<bool> removed(candidates.size(), false);
    for (std::size_t i = 0; i < candidates.size() && kept.size() < degree; ++i) {
        if (removed[i]) {
            continue;
        }
        const idx_t c = candidates[i].id;
        kept.push_back(c);
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            if (removed[j] || !can_prune(c, candidates[j].id)) {
                continue;
            }
            if (alpha * pair_distance(c, candidates[j].id) <= candidates[j].distance) {
                removed[j] = true;
            }
        }
    }
    return kept;
}

template <class PairDistance>
std::vector<idx_t> robust_prune(std::vector<Neighbor> candidates,
                                idx_t self,
                                float alpha,
                                std::size_t degree,
                                PairDistance&& pair_distance) {
    return robust_prune(std::move(candidates), self, alpha, degree,
                        std::forward<PairDistance>(pair_distance), [](idx_t, idx_t) { return true; });
}

/// How a layered builder trims a node's candidate list to the degree cap.
enum class NeighborSelection : std::uint8_t {
    Heuristic,  // diversity prune (alpha = 1)
    Nearest,    // keep the nearest, no pruning
    Densified,  // nearest `base_degree` kept, diversity prune for the rest
};

struct LayeredParams {
    std::uint32_t M = 16;                // upper-layer degree; layer-0 cap defaults to M
    std::uint32_t ef_construction = 100;
    NeighborSelection selection = NeighborSelection::Heuristic;
    std::uint32_t degree0 = 0;           // layer-0 cap; 0 = M
    std::uint32_t base_degree = 0;       // Densified: unconditionally kept prefix
    std::uint64_t seed = 42;
    int threads = 1;
};

/// Hierarchical small-world graph with geometric level assignment
/// (multiplier 1/ln M). Deterministic for threads == 1.
ProximityGraph build_layered_graph(const Dataset& data, const LayeredParams& params, Metric metric);

/// Hooks that make a Vamana build label-aware. All ids are local (positions
/// in the member list).
struct VamanaHooks {
    /// Candidate-selection predicate: may x enter p's candidate queue?
    std::function<bool(idx_t p, idx_t x)> admit;
    /// May `kept` prune `victim` while building p's list?
    std::function<bool(idx_t p, idx_t kept, idx_t victim)> can_prune;
    /// Search entry points for inserting p (default: the medoid).
    std::function<std::vector<idx_t>(idx_t p)> entries;
};

struct VamanaGraph {
    Adjacency adjacency;  // local ids
    idx_t medoid = 0;     // local id
};

/// Vamana over `members` (global ids into `data`; empty = all records).
/// Insertion in seeded random order from an empty graph; back edges are
/// re-pruned on overflow.
VamanaGraph build_vamana(const Dataset& data,
                         std::span<const idx_t> members,
                         const PruneParams& params,
                         Metric metric,
                         std::uint64_t seed,
                         const VamanaHooks& hooks = {});

/// Member closest to the members' centroid (local id).
idx_t approximate_medoid(const Dataset& data, std::span<const idx_t> members, Metric metric);

/// NN-descent K-NN graph under an arbitrary pairwise distance over ids
/// [0, n). iterations = 0 returns the random initialization.
std::vector<std::vector<Neighbor>> build_knn_graph(std::size_t n,
                                                   std::size_t K,
                                                   std::size_t iterations,
                                                   const std::function<float(idx_t, idx_t)>& pair_distance,
                                                   std::uint64_t seed);

}  // namespace fanns
