#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "fanns/distance.h"
#include "strategy_internal.h"

namespace fanns {

using detail::param_int;

namespace {

std::size_t require_fixed_length(const Dataset& data, std::string_view who) {
    const auto length = data.fixed_label_length();
    if (!length) {
        throw ConstraintError(std::string(who) + " needs every record to carry a label vector of one fixed length");
    }
    return *length;
}

}  // namespace

std::size_t FusedMetric::hamming(const LabelSet& a, const LabelSet& b) const {
    if (a.size() != label_length || b.size() != label_length) {
        throw ConstraintError("label vector length differs from " + std::to_string(label_length));
    }
    std::size_t diff = 0;
    for (std::size_t i = 0; i < label_length; ++i) {
        diff += a.labels()[i] != b.labels()[i];
    }
    return diff;
}

float FusedMetric::operator()(std::span<const float> a, const LabelSet& la, std::span<const float> b,
                              const LabelSet& lb) const {
    return distance(base, a, b) + lambda * float(hamming(la, lb));
}

float auto_lambda(const Dataset& data, Metric metric, std::size_t label_length, std::size_t pairs, std::uint64_t seed) {
    if (data.size() < 2 || label_length == 0) {
        return 0.0f;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<idx_t> pick(0, idx_t(data.size() - 1));
    double total = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
        const idx_t a = pick(rng);
        idx_t b = pick(rng);
        while (b == a) {
            b = pick(rng);
        }
        total += distance_unchecked(metric, data.vector(a).data(), data.vector(b).data(), data.dim());
    }
    return float(std::abs(total / double(pairs)) / double(label_length));
}

NhqIndex::NhqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed)
        : StrategyIndex(std::move(data), metric, params) {
    const Dataset& d = *data_;
    fused_.base = metric_;
    fused_.label_length = require_fixed_length(d, "nhq");
    const int K = param_int(params_, "K");
    const int iterations = param_int(params_, "iterations");
    const int diversify = param_int(params_, "diversify");
    const int seeds = param_int(params_, "seeds");
    if (K < 1 || iterations < 0 || diversify < 0 || seeds < 1) {
        throw ParameterError("nhq needs K >= 1, iterations >= 0, diversify >= 0, seeds >= 1");
    }
    const double lambda = params_.at("lambda");
    fused_.lambda = lambda < 0 ? auto_lambda(d, metric_, fused_.label_length, 1000, seed) : float(lambda);

    const std::size_t n = d.size();
    const std::size_t dim = d.dim();
    auto pair_fused = [&](idx_t a, idx_t b) {
        return distance_unchecked(metric_, d.vector(a).data(), d.vector(b).data(), dim) +
               fused_.lambda * float(fused_.hamming(d.labels(a), d.labels(b)));
    };
    adjacency_.assign(n, {});
    if (n > 1) {
        const auto knn = build_knn_graph(n, std::min<std::size_t>(std::size_t(K), n - 1), std::size_t(iterations),
                                         pair_fused, seed);
        for (idx_t u = 0; u < n; ++u) {
            for (const auto& nb : knn[u]) {
                adjacency_[u].push_back(nb.id);
            }
        }
    }

    // add edges toward under-covered directions among two-hop candidates
    std::vector<float> dir(dim);
    auto unit = [&](idx_t from, idx_t to, float* out) {
        float norm = 0;
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] = d.vector(to)[j] - d.vector(from)[j];
            norm += out[j] * out[j];
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] = norm > 0 ? out[j] / norm : 0.0f;
        }
    };
    Adjacency extra(n);
    for (idx_t u = 0; u < n && diversify > 0; ++u) {
        const auto& base = adjacency_[u];
        std::vector<Neighbor> cands;
        for (idx_t v : base) {
            for (idx_t w : adjacency_[v]) {
                if (w != u && std::find(base.begin(), base.end(), w) == base.end()) {
                    cands.push_back({w, pair_fused(u, w)});
                }
            }
        }
        cands = detail::top_k(std::move(cands), 64);
        if (cands.empty()) {
            continue;
        }
        std::vector<float> cand_dirs(cands.size() * dim);
        std::vector<float> max_cos(cands.size(), -1.0f);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            unit(u, cands[i].id, cand_dirs.data() + i * dim);
        }
        auto cover = [&](const float* chosen) {
            for (std::size_t i = 0; i < cands.size(); ++i) {
                max_cos[i] = std::max(max_cos[i], inner_product(chosen, cand_dirs.data() + i * dim, dim));
            }
        };
        for (idx_t v : base) {
            unit(u, v, dir.data());
            cover(dir.data());
        }
        std::vector<bool> taken(cands.size(), false);
        for (int added = 0; added < diversify; ++added) {
            std::size_t best = cands.size();
            for (std::size_t i = 0; i < cands.size(); ++i) {
                if (!taken[i] && (best == cands.size() || max_cos[i] < max_cos[best])) {
                    best = i;
                }
            }
            if (best == cands.size()) {
                break;
            }
            taken[best] = true;
            extra[u].push_back(cands[best].id);
            cover(cand_dirs.data() + best * dim);
        }
    }
    for (idx_t u = 0; u < n; ++u) {
        adjacency_[u].insert(adjacency_[u].end(), extra[u].begin(), extra[u].end());
    }

    // reverse edges, capped
    const std::size_t cap = 2 * std::size_t(K) + std::size_t(diversify);
    Adjacency reverse(n);
    for (idx_t u = 0; u < n; ++u) {
        for (idx_t v : adjacency_[u]) {
            reverse[v].push_back(u);
        }
    }
    for (idx_t v = 0; v < n; ++v) {
        auto& list = adjacency_[v];
        for (idx_t u : reverse[v]) {
            if (list.size() >= cap) {
                break;
            }
            if (std::find(list.begin(), list.end(), u) == list.end()) {
                list.push_back(u);
            }
        }
    }

    std::mt19937_64 rng(seed ^ 0x5eedull);
    std::vector<idx_t> ids(n);
    std::iota(ids.begin(), ids.end(), idx_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(std::min<std::size_t>(n, std::size_t(seeds)));
    std::sort(ids.begin(), ids.end());
    seeds_ = std::move(ids);
}

NhqIndex::NhqIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, float lambda,
                   Adjacency adjacency, std::vector<idx_t> seeds)
        : StrategyIndex(std::move(data), metric, params), adjacency_(std::move(adjacency)), seeds_(std::move(seeds)) {
    fused_.base = metric_;
    fused_.lambda = lambda;
    fused_.label_length = require_fixed_length(*data_, "nhq");
    for (idx_t s : seeds_) {
        if (s >= data_->size()) {
            throw FormatError("nhq seed out of range");
        }
    }
}

SearchOutput NhqIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap*) const {
    validate(query);
    const Dataset& d = *data_;
    const QueryDistance delta(d, query.embedding, metric_);
    std::size_t checks = 0;
    auto fused = [&](idx_t v) {
        ++checks;
        return delta(v) + fused_.lambda * float(fused_.hamming(query.labels, d.labels(v)));
    };
    std::vector<Neighbor> seeded;
    for (idx_t s : seeds_) {
        seeded.push_back({s, fused(s)});
    }
    seeded = detail::top_k(std::move(seeded), 8);
    std::vector<idx_t> entries;
    for (const auto& nb : seeded) {
        entries.push_back(nb.id);
    }
    auto exact_match = [&](idx_t v) { return d.labels(v) == query.labels; };

    SearchOutput out;
    out.final_scope = std::max(knob, query.k);
    BeamParams beam;
    beam.beam_width = out.final_scope;
    SearchStats stats;
    out.neighbors = beam_search(AdjacencyView{&adjacency_}, entries, fused, AlwaysTrue{}, exact_match, beam, &stats);
    if (out.neighbors.size() > query.k) {
        out.neighbors.resize(query.k);
    }
    for (auto& nb : out.neighbors) {
        nb.distance = delta(nb.id);
    }
    out.distance_evals = stats.distance_evals + seeds_.size();
    out.label_checks = checks + stats.accept_checks;
    return out;
}

void NhqIndex::save_payload(BinaryWriter& out) const {
    out.put<float>(fused_.lambda);
    detail::save_adjacency(out, adjacency_);
    out.put_vector(seeds_);
}

CapsIndex::CapsIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, std::uint64_t seed,
                     int threads)
        : StrategyIndex(std::move(data), metric, params) {
    const Dataset& d = *data_;
    require_fixed_length(d, "caps");
    const int clusters = param_int(params_, "clusters");
    const int h = param_int(params_, "h");
    if (h < 1) {
        throw ParameterError("caps needs h >= 1");
    }
    if (clusters < 1) {
        throw ParameterError("caps needs clusters >= 1");
    }
    KMeansParams kp;
    kp.k = std::min<std::size_t>(std::size_t(clusters), d.size());
    kp.seed = seed;
    kp.threads = threads;
    coarse_ = kmeans(d.values(), d.dim(), kp);
    const auto assign = assign_nearest(coarse_, d.values(), threads);
    std::vector<std::vector<idx_t>> members(coarse_.k());
    for (idx_t id = 0; id < d.size(); ++id) {
        members[assign[id]].push_back(id);
    }

    clusters_.resize(coarse_.k());
    for (std::size_t c = 0; c < coarse_.k(); ++c) {
        std::vector<idx_t> remaining = std::move(members[c]);
        for (int s = 0; s + 1 < h && !remaining.empty(); ++s) {
            std::map<label_t, std::size_t> freq;
            for (idx_t id : remaining) {
                for (label_t x : d.labels(id)) {
                    ++freq[x];
                }
            }
            if (freq.empty()) {
                break;
            }
            // most frequent, lowest label id on ties
            auto best = freq.begin();
            for (auto it = freq.begin(); it != freq.end(); ++it) {
                if (it->second > best->second) {
                    best = it;
                }
            }
            CapsSubCluster sub;
            sub.label = best->first;
            std::vector<idx_t> rest;
            for (idx_t id : remaining) {
                (d.labels(id).contains(best->first) ? sub.members : rest).push_back(id);
            }
            clusters_[c].push_back(std::move(sub));
            remaining = std::move(rest);
        }
        clusters_[c].push_back(CapsSubCluster{std::nullopt, std::move(remaining)});
    }
}

CapsIndex::CapsIndex(std::shared_ptr<const Dataset> data, Metric metric, const ParamMap& params, KMeansModel coarse,
                     std::vector<std::vector<CapsSubCluster>> clusters)
        : StrategyIndex(std::move(data), metric, params), coarse_(std::move(coarse)), clusters_(std::move(clusters)) {
    require_fixed_length(*data_, "caps");
}

std::vector<std::uint32_t> CapsIndex::default_sweep() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t p = 1; p < coarse_.k(); p *= 2) {
        out.push_back(p);
    }
    out.push_back(std::uint32_t(coarse_.k()));
    return out;
}

SearchOutput CapsIndex::search(const FilteredQuery& query, std::uint32_t knob, const FilterBitmap*) const {
    validate(query);
    const Dataset& d = *data_;
    const std::size_t nprobe = std::clamp<std::size_t>(knob, 1, coarse_.k());
    std::vector<Neighbor> order(coarse_.k());
    for (std::size_t c = 0; c < coarse_.k(); ++c) {
        order[c] = {idx_t(c), squared_l2(query.embedding.data(), coarse_.centroid(c).data(), coarse_.dim)};
    }
    std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(nprobe), order.end(), closer);

    SearchOutput out;
    out.final_scope = std::uint32_t(nprobe);
    const QueryDistance dist(d, query.embedding, metric_);
    std::vector<Neighbor> found;
    for (std::size_t i = 0; i < nprobe; ++i) {
        for (const auto& sub : clusters_[order[i].id]) {
            if (sub.label && !query.labels.contains(*sub.label)) {
                continue;
            }
            // records equal to the query land in the first sub-cluster whose
            // label the query carries
            for (idx_t id : sub.members) {
                ++out.label_checks;
                if (d.labels(id) == query.labels) {
                    found.push_back({id, dist(id)});
                }
            }
            break;
        }
    }
    out.distance_evals = found.size();
    out.neighbors = detail::top_k(std::move(found), query.k);
    return out;
}

void CapsIndex::save_payload(BinaryWriter& out) const {
    coarse_.save(out);
    out.put<std::uint64_t>(clusters_.size());
    for (const auto& cluster : clusters_) {
        out.put<std::uint64_t>(cluster.size());
        for (const auto& sub : cluster) {
            out.put<std::uint8_t>(sub.label ? 1 : 0);
            out.put<std::uint32_t>(sub.label.value_or(0));
            out.put_vector(sub.members);
        }
    }
}

namespace detail {

std::unique_ptr<StrategyIndex> load_nhq(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                        const ParamMap& params) {
    const float lambda = in.get<float>();
    auto adjacency = load_adjacency(in, data->size());
    auto seeds = in.get_vector<idx_t>();
    return std::make_unique<NhqIndex>(std::move(data), metric, params, lambda, std::move(adjacency), std::move(seeds));
}

std::unique_ptr<StrategyIndex> load_caps(BinaryReader& in, std::shared_ptr<const Dataset> data, Metric metric,
                                         const ParamMap& params) {
    auto coarse = KMeansModel::load(in);
    if (coarse.dim != data->dim()) {
        in.fail("caps centroid dimension does not match the dataset");
    }
    const auto count = in.get<std::uint64_t>();
    if (count != coarse.k()) {
        in.fail("caps cluster count does not match its centroids");
    }
    std::vector<std::vector<CapsSubCluster>> clusters(count);
    std::size_t total = 0;
    for (auto& cluster : clusters) {
        const auto subs = in.get<std::uint64_t>();
        if (subs > in.remaining()) {
            in.fail("caps sub-cluster count exceeds the payload");
        }
        for (std::uint64_t s = 0; s < subs; ++s) {
            CapsSubCluster sub;
            const bool has_label = in.get<std::uint8_t>() != 0;
            const auto label = in.get<std::uint32_t>();
            if (has_label) {
                sub.label = label;
            }
            sub.members = in.get_vector<idx_t>();
            for (idx_t id : sub.members) {
                if (id >= data->size()) {
                    in.fail("caps member id out of range");
                }
            }
            total += sub.members.size();
            cluster.push_back(std::move(sub));
        }
    }
    if (total != data->size()) {
        in.fail("caps sub-clusters do not cover the dataset");
    }
    return std::make_unique<CapsIndex>(std::move(data), metric, params, std::move(coarse), std::move(clusters));
}

}  // namespace detail

}  // namespace fanns
