#include "fanns/graph.h"

#include <cmath>
#include <mutex>
#include <numeric>
#include <random>

#include <omp.h>

#include "fanns/distance.h"
#include "fanns/serialize.h"

namespace fanns {

ProximityGraph ProximityGraph::from_adjacency(Adjacency adjacency, std::vector<idx_t> entry_points) {
    ProximityGraph g(adjacency.size());
    for (std::size_t v = 0; v < adjacency.size(); ++v) {
        g.links_[v][0] = std::move(adjacency[v]);
    }
    g.entry_points_ = std::move(entry_points);
    return g;
}

std::size_t ProximityGraph::max_degree(int level) const {
    std::size_t best = 0;
    for (const auto& node : links_) {
        if (int(node.size()) > level) {
            best = std::max(best, node[std::size_t(level)].size());
        }
    }
    return best;
}

std::size_t ProximityGraph::edge_count(int level) const {
    std::size_t total = 0;
    for (const auto& node : links_) {
        if (int(node.size()) > level) {
            total += node[std::size_t(level)].size();
        }
    }
    return total;
}

Adjacency ProximityGraph::layer(int level) const {
    Adjacency out(links_.size());
    for (std::size_t v = 0; v < links_.size(); ++v) {
        if (int(links_[v].size()) > level) {
            out[v] = links_[v][std::size_t(level)];
        }
    }
    return out;
}

void ProximityGraph::save(BinaryWriter& out) const {
    out.put<std::uint64_t>(links_.size());
    out.put<std::int32_t>(max_level_);
    out.put_vector(entry_points_);
    for (const auto& node : links_) {
        out.put<std::uint32_t>(std::uint32_t(node.size()));
        for (const auto& list : node) {
            out.put_vector(list);
        }
    }
}

ProximityGraph ProximityGraph::load(BinaryReader& in) {
    const auto n = in.get<std::uint64_t>();
    ProximityGraph g;
    g.max_level_ = in.get<std::int32_t>();
    g.entry_points_ = in.get_vector<idx_t>();
    if (n > in.remaining()) {
        in.fail("graph node count exceeds input");
    }
    g.links_.resize(n);
    for (auto& node : g.links_) {
        const auto levels = in.get<std::uint32_t>();
        if (levels == 0 || levels > 64) {
            in.fail("invalid level count " + std::to_string(levels));
        }
        node.resize(levels);
        for (auto& list : node) {
            list = in.get_vector<idx_t>();
            for (idx_t v : list) {
                if (v >= n) {
                    in.fail("neighbor id out of range");
                }
            }
        }
    }
    for (idx_t e : g.entry_points_) {
        if (e >= n) {
            in.fail("entry point out of range");
        }
    }
    return g;
}

VisitedSet& thread_visited_set() {
    thread_local VisitedSet visited;
    return visited;
}

namespace {

/// Distance from one stored point to the others, with prefetch.
struct PointDistance {
    const float* x;
    const float* base;
    std::size_t dim;
    Metric metric;

    float operator()(idx_t u) const { return distance_unchecked(metric, x, base + std::size_t(u) * dim, dim); }
    void prefetch(idx_t u) const { prefetch_vector(base + std::size_t(u) * dim, dim); }
};

/// Layer view that copies neighbor lists under the node lock while a
/// multi-threaded build mutates them.
struct LockedLayerView {
    const ProximityGraph* graph;
    int level;
    std::vector<std::mutex>* locks;
    bool parallel;

    std::size_t size() const { return graph->size(); }
    std::span<const idx_t> neighbors(idx_t v, std::vector<idx_t>& scratch) const {
        if (!parallel) {
            return graph->neighbors(v, level);
        }
        std::lock_guard guard((*locks)[v]);
        const auto list = graph->neighbors(v, level);
        scratch.assign(list.begin(), list.end());
        return scratch;
    }
};

}  // namespace

ProximityGraph build_layered_graph(const Dataset& data, const LayeredParams& params, Metric metric) {
    if (params.M < 2) {
        throw ParameterError("layered graph requires M >= 2");
    }
    const std::size_t n = data.size();
    ProximityGraph graph(n);
    if (n == 0) {
        return graph;
    }
    const std::size_t cap0 = params.degree0 ? params.degree0 : params.M;
    const std::size_t cap_upper = params.M;
    const std::size_t base_degree = std::min<std::size_t>(params.base_degree, cap0);
    const std::size_t dim = data.dim();
    const double level_mult = 1.0 / std::log(double(params.M));

    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (idx_t v = 0; v < n; ++v) {
        const double u = 1.0 - uniform(rng);  // (0, 1]
        graph.set_level(v, int(-std::log(u) * level_mult));
    }

    auto pair_distance = [&](idx_t a, idx_t b) {
        return distance_unchecked(metric, data.vector(a).data(), data.vector(b).data(), dim);
    };
    auto select = [&](idx_t self, std::vector<Neighbor> candidates, std::size_t cap) {
        std::erase_if(candidates, [self](const Neighbor& c) { return c.id == self; });
        std::sort(candidates.begin(), candidates.end(), closer);
        switch (params.selection) {
            case NeighborSelection::Nearest: {
                std::vector<idx_t> out;
                for (std::size_t i = 0; i < candidates.size() && out.size() < cap; ++i) {
                    if (out.empty() || std::find(out.begin(), out.end(), candidates[i].id) == out.end()) {
                        out.push_back(candidates[i].id);
                    }
                }
                return out;
            }
            case NeighborSelection::Heuristic:
                return robust_prune(std::move(candidates), self, 1.0f, cap, pair_distance);
            case NeighborSelection::Densified: {
                std::vector<idx_t> out;
                std::size_t i = 0;
                for (; i < candidates.size() && out.size() < std::min(base_degree, cap); ++i) {
                    if (std::find(out.begin(), out.end(), candidates[i].id) == out.end()) {
                        out.push_back(candidates[i].id);
                    }
                }
                for (; i < candidates.size() && out.size() < cap; ++i) {
                    const Neighbor& c = candidates[i];
                    if (std::find(out.begin(), out.end(), c.id) != out.end()) {
                        continue;
                    }
                    bool dominated = false;
                    for (std::size_t j = base_degree; j < out.size() && !dominated; ++j) {
                        dominated = pair_distance(out[j], c.id) <= c.distance;
                    }
                    if (!dominated) {
                        out.push_back(c.id);
                    }
                }
                return out;
            }
        }
        return std::vector<idx_t>{};
    };

    const bool parallel = params.threads > 1;
    std::vector<std::mutex> locks(parallel ? n : 0);
    std::mutex entry_lock;
    idx_t entry = 0;
    int max_level = graph.level(0);

    auto insert = [&](idx_t v) {
        idx_t cur;
        int top;
        {
            std::unique_lock guard(entry_lock, std::defer_lock);
            if (parallel) {
                guard.lock();
            }
            cur = entry;
            top = max_level;
        }
        const int level = graph.level(v);
        const float* vv = data.vector(v).data();
        const PointDistance dist{vv, data.values().data(), dim, metric};
        float cur_d = dist(cur);
        std::vector<idx_t> scratch;
        for (int lev = top; lev > level; --lev) {
            LockedLayerView view{&graph, lev, &locks, parallel};
            bool moved = true;
            while (moved) {
                moved = false;
                for (idx_t nb : view.neighbors(cur, scratch)) {
                    const float d = dist(nb);
                    if (d < cur_d) {
                        cur_d = d;
                        cur = nb;
                        moved = true;
                    }
                }
            }
        }
        std::vector<idx_t> entries{cur};
        for (int lev = std::min(level, top); lev >= 0; --lev) {
            const std::size_t cap = lev == 0 ? cap0 : cap_upper;
            LockedLayerView view{&graph, lev, &locks, parallel};
            BeamParams beam;
            beam.beam_width = std::uint32_t(std::max<std::size_t>(params.ef_construction, cap));
            auto found = beam_search(view, entries, dist, AlwaysTrue{}, AlwaysTrue{}, beam);
            std::vector<idx_t> chosen = select(v, found, cap);
            {
                std::unique_lock guard = parallel ? std::unique_lock(locks[v]) : std::unique_lock<std::mutex>();
                graph.mutable_neighbors(v, lev) = chosen;
            }
            for (idx_t u : chosen) {
                std::unique_lock guard = parallel ? std::unique_lock(locks[u]) : std::unique_lock<std::mutex>();
                auto& list = graph.mutable_neighbors(u, lev);
                if (std::find(list.begin(), list.end(), v) != list.end()) {
                    continue;
                }
                if (list.size() < cap) {
                    list.push_back(v);
                    continue;
                }
                std::vector<Neighbor> pool;
                pool.reserve(list.size() + 1);
                const PointDistance from_u{data.vector(u).data(), data.values().data(), dim, metric};
                for (idx_t w : list) {
                    from_u.prefetch(w);
                }
                for (idx_t w : list) {
                    pool.push_back({w, pair_distance(u, w)});
                }
                pool.push_back({v, pair_distance(u, v)});
                list = select(u, std::move(pool), cap);
            }
            entries.clear();
            for (const auto& nb : found) {
                entries.push_back(nb.id);
            }
        }
        if (level > top) {
            std::unique_lock guard(entry_lock, std::defer_lock);
            if (parallel) {
                guard.lock();
            }
            if (level > max_level) {
                max_level = level;
                entry = v;
            }
        }
    };

    const auto count = static_cast<std::int64_t>(n);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 64) num_threads(params.threads)
        for (std::int64_t v = 1; v < count; ++v) {
            insert(idx_t(v));
        }
    } else {
        for (std::int64_t v = 1; v < count; ++v) {
            insert(idx_t(v));
        }
    }
    graph.set_entry_points({entry});
    graph.set_max_level(max_level);
    return graph;
}

idx_t approximate_medoid(const Dataset& data, std::span<const idx_t> members, Metric metric) {
    if (members.empty()) {
        throw ParameterError("medoid of an empty member list");
    }
    const std::size_t dim = data.dim();
    std::vector<double> sum(dim, 0.0);
    for (idx_t id : members) {
        auto v = data.vector(id);
        for (std::size_t j = 0; j < dim; ++j) {
            sum[j] += v[j];
        }
    }
    std::vector<float> centroid(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        centroid[j] = float(sum[j] / double(members.size()));
    }
    idx_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i) {
        // medoid is a geometric notion; squared L2 regardless of metric
        (void)metric;
        const float d = squared_l2(centroid.data(), data.vector(members[i]).data(), dim);
        if (d < best_d) {
            best_d = d;
            best = idx_t(i);
        }
    }
    return best;
}

VamanaGraph build_vamana(const Dataset& data,
                         std::span<const idx_t> members_in,
                         const PruneParams& params,
                         Metric metric,
                         std::uint64_t seed,
                         const VamanaHooks& hooks) {
    if (params.alpha < 1.0f) {
        throw ParameterError("alpha must be >= 1");
    }
    if (params.degree < 1) {
        throw ParameterError("Vamana degree must be >= 1");
    }
    std::vector<idx_t> all;
    if (members_in.empty()) {
        all.resize(data.size());
        std::iota(all.begin(), all.end(), idx_t{0});
        members_in = all;
    }
    const std::span<const idx_t> members = members_in;
    const std::size_t m = members.size();
    VamanaGraph out;
    out.adjacency.resize(m);
    if (m == 0) {
        return out;
    }
    out.medoid = approximate_medoid(data, members, metric);
    const std::size_t dim = data.dim();
    auto local_distance = [&](idx_t a, idx_t b) {
        return distance_unchecked(metric, data.vector(members[a]).data(), data.vector(members[b]).data(), dim);
    };

    std::vector<idx_t> order(m);
    std::iota(order.begin(), order.end(), idx_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    Adjacency& adj = out.adjacency;
    const AdjacencyView view{&adj};
    BeamParams beam;
    beam.beam_width = std::max(params.build_beam, params.degree);

    for (idx_t p : order) {
        std::vector<idx_t> entries = hooks.entries ? hooks.entries(p) : std::vector<idx_t>{out.medoid};
        if (entries.empty()) {
            entries.push_back(out.medoid);
        }
        auto dist = [&](idx_t x) { return local_distance(p, x); };
        std::vector<Neighbor> expanded;
        std::vector<Neighbor> found;
        if (hooks.admit) {
            auto admit = [&](idx_t x) { return hooks.admit(p, x); };
            found = beam_search(view, entries, dist, admit, admit, beam, nullptr, &expanded);
        } else {
            found = beam_search(view, entries, dist, AlwaysTrue{}, AlwaysTrue{}, beam, nullptr, &expanded);
        }
        expanded.insert(expanded.end(), found.begin(), found.end());
        if (hooks.admit) {
            std::erase_if(expanded, [&](const Neighbor& c) { return !hooks.admit(p, c.id); });
        }
        auto prune_for = [&](idx_t node, std::vector<Neighbor> pool) {
            if (hooks.can_prune) {
                return robust_prune(std::move(pool), node, params.alpha, params.degree, local_distance,
                                    [&](idx_t kept, idx_t victim) { return hooks.can_prune(node, kept, victim); });
            }
            return robust_prune(std::move(pool), node, params.alpha, params.degree, local_distance);
        };
        adj[p] = prune_for(p, std::move(expanded));
        for (idx_t j : adj[p]) {
            auto& list = adj[j];
            if (std::find(list.begin(), list.end(), p) != list.end()) {
                continue;
            }
            if (list.size() < params.degree) {
                list.push_back(p);
                continue;
            }
            std::vector<Neighbor> pool;
            pool.reserve(list.size() + 1);
            for (idx_t w : list) {
                pool.push_back({w, local_distance(j, w)});
            }
            pool.push_back({p, local_distance(j, p)});
            list = prune_for(j, std::move(pool));
        }
    }
    return out;
}

std::vector<std::vector<Neighbor>> build_knn_graph(std::size_t n,
                                                   std::size_t K,
                                                   std::size_t iterations,
                                                   const std::function<float(idx_t, idx_t)>& pair_distance,
                                                   std::uint64_t seed) {
    if (n == 0) {
        return {};
    }
    if (K >= n) {
        throw ParameterError("kNN graph requires K < n");
    }
    struct Entry {
        idx_t id;
        float distance;
        bool fresh;
    };
    std::vector<std::vector<Entry>> lists(n);
    std::mt19937_64 rng(seed);

    for (idx_t u = 0; u < n; ++u) {
        std::vector<idx_t> picks;
        if (K * 2 >= n) {
            for (idx_t v = 0; v < n; ++v) {
                if (v != u) {
                    picks.push_back(v);
                }
            }
            std::shuffle(picks.begin(), picks.end(), rng);
            picks.resize(K);
        } else {
            std::uniform_int_distribution<idx_t> pick(0, idx_t(n - 1));
            while (picks.size() < K) {
                const idx_t v = pick(rng);
                if (v != u && std::find(picks.begin(), picks.end(), v) == picks.end()) {
                    picks.push_back(v);
                }
            }
        }
        for (idx_t v : picks) {
            lists[u].push_back({v, pair_distance(u, v), true});
        }
        std::sort(lists[u].begin(), lists[u].end(), [](const Entry& a, const Entry& b) {
            return closer({a.id, a.distance}, {b.id, b.distance});
        });
    }

    auto try_insert = [&](idx_t owner, idx_t cand, float d) -> std::size_t {
        auto& list = lists[owner];
        const Entry& worst = list.back();
        if (!closer({cand, d}, {worst.id, worst.distance})) {
            return 0;
        }
        for (const Entry& e : list) {
            if (e.id == cand) {
                return 0;
            }
        }
        list.back() = {cand, d, true};
        for (std::size_t i = list.size() - 1; i > 0; --i) {
            if (closer({list[i].id, list[i].distance}, {list[i - 1].id, list[i - 1].distance})) {
                std::swap(list[i], list[i - 1]);
            } else {
                break;
            }
        }
        return 1;
    };

    for (std::size_t it = 0; it < iterations; ++it) {
        std::vector<std::vector<idx_t>> fresh(n), old(n), rfresh(n), rold(n);
        for (idx_t u = 0; u < n; ++u) {
            for (Entry& e : lists[u]) {
                if (e.fresh) {
                    fresh[u].push_back(e.id);
                    rfresh[e.id].push_back(u);
                    e.fresh = false;
                } else {
                    old[u].push_back(e.id);
                    rold[e.id].push_back(u);
                }
            }
        }
        for (idx_t u = 0; u < n; ++u) {
            for (auto* reverse : {&rfresh[u], &rold[u]}) {
                if (reverse->size() > K) {
                    std::shuffle(reverse->begin(), reverse->end(), rng);
                    reverse->resize(K);
                }
            }
            fresh[u].insert(fresh[u].end(), rfresh[u].begin(), rfresh[u].end());
            old[u].insert(old[u].end(), rold[u].begin(), rold[u].end());
            for (auto* ids : {&fresh[u], &old[u]}) {
                std::sort(ids->begin(), ids->end());
                ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
            }
        }
        std::size_t updates = 0;
        for (idx_t u = 0; u < n; ++u) {
            const auto& nu = fresh[u];
            const auto& ou = old[u];
            for (std::size_t i = 0; i < nu.size(); ++i) {
                for (std::size_t j = i + 1; j < nu.size(); ++j) {
                    const float d = pair_distance(nu[i], nu[j]);
                    updates += try_insert(nu[i], nu[j], d) + try_insert(nu[j], nu[i], d);
                }
                for (idx_t o : ou) {
                    if (o == nu[i]) {
                        continue;
                    }
                    const float d = pair_distance(nu[i], o);
                    updates += try_insert(nu[i], o, d) + try_insert(o, nu[i], d);
                }
            }
        }
        if (updates == 0) {
            break;
        }
    }

    std::vector<std::vector<Neighbor>> out(n);
    for (idx_t u = 0; u < n; ++u) {
        for (const Entry& e : lists[u]) {
            out[u].push_back({e.id, e.distance});
        }
    }
    return out;
}

}  // namespace fanns
