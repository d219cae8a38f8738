#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fanns/distance.h"
#include "fanns/exact_oracle.h"
#include "fanns/metrics.h"
#include "fanns/strategies.h"
#include "fanns/workload.h"
#include "fixtures.h"

using namespace fanns;

namespace {

constexpr Metric kL2 = Metric::SquaredEuclidean;

std::shared_ptr<const Dataset> shared(Dataset d) {
    return std::make_shared<const Dataset>(std::move(d));
}

std::shared_ptr<const Dataset> multi_label_data(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return shared(testing::random_dataset(rng, n, dim, 6, 3));
}

std::shared_ptr<const Dataset> fixed_length_data(std::size_t n, std::size_t dim, std::size_t L, std::size_t V,
                                                 std::uint64_t seed) {
    return shared(Dataset(dim, gen_clustered_vectors(n, dim, 10, seed), gen_fixed_length_labels(n, L, V, seed + 1)));
}

bool fixed_only(Algorithm a) {
    return a == Algorithm::Nhq || a == Algorithm::Caps;
}

/// Parameters small enough for tests; graphs stay well connected.
ParamMap small_params(Algorithm a) {
    switch (a) {
        case Algorithm::PostFilterHnsw:
            return {{"M", 8}, {"ef_construction", 64}};
        case Algorithm::PostFilterIvfPq:
            return {{"nlist", 16}};
        case Algorithm::AcornGamma:
            return {{"M", 8}, {"gamma", 4}};
        case Algorithm::AcornOne:
            return {{"M", 8}, {"ef_construction", 64}};
        case Algorithm::Ung:
            return {{"R", 16}, {"L", 32}};
        case Algorithm::FilteredVamana:
            return {{"R", 24}, {"L", 48}};
        case Algorithm::StitchedVamana:
            return {{"R_small", 16}, {"L_small", 32}, {"R_stitched", 32}};
        case Algorithm::Nhq:
            return {{"K", 16}, {"iterations", 6}, {"seeds", 32}};
        case Algorithm::Caps:
            return {{"clusters", 8}, {"h", 6}};
        default:
            return {};
    }
}

std::unique_ptr<StrategyIndex> build(Algorithm a, std::shared_ptr<const Dataset> d, ParamMap extra = {},
                                     std::uint64_t seed = 42) {
    ParamMap p = small_params(a);
    for (const auto& [k, v] : extra) {
        p[k] = v;
    }
    BuildOptions opt;
    opt.seed = seed;
    return build_index(a, std::move(d), p, opt);
}

std::vector<FilteredQuery> random_queries(const Dataset& d, Constraint c, std::size_t count, std::uint32_t k,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0, 1);
    std::uniform_int_distribution<idx_t> pick(0, idx_t(d.size() - 1));
    std::vector<FilteredQuery> out;
    for (std::size_t i = 0; i < count; ++i) {
        FilteredQuery q;
        const auto v = d.vector(pick(rng));
        for (float x : v) {
            q.embedding.push_back(x + 0.1f * g(rng));
        }
        // labels of a random record keep the filter non-empty
        q.labels = d.labels(pick(rng));
        q.k = k;
        q.constraint = c;
        out.push_back(std::move(q));
    }
    return out;
}

double mean_recall(const StrategyIndex& index, std::span<const FilteredQuery> queries, std::uint32_t knob) {
    const Dataset& d = index.data();
    double sum = 0;
    std::size_t counted = 0;
    for (const auto& q : queries) {
        const auto truth = exact_filtered_knn(d, index.label_index(), q, kL2);
        if (truth.neighbors.empty()) {
            continue;
        }
        const auto out = index.search(q, knob);
        std::vector<idx_t> ids;
        for (const auto& nb : out.neighbors) {
            ids.push_back(nb.id);
        }
        sum += recall_at_k(ids, truth.to_ground_truth(), q.k);
        ++counted;
    }
    return counted ? sum / double(counted) : 1.0;
}

}  // namespace

TEST_CASE("demo dataset: every general strategy finds the oracle answers") {
    const auto demo = shared(testing::demo_dataset());
    for (Algorithm a : kAllAlgorithms) {
        if (fixed_only(a)) {
            continue;
        }
        CAPTURE(to_string(a));
        const auto index = build(a, demo);
        for (Constraint c : {Constraint::Containment, Constraint::Equality, Constraint::Overlap}) {
            CAPTURE(to_string(c));
            for (std::uint32_t k : {1u, 7u}) {
                const auto q = testing::demo_query(c, k);
                const auto expect = exact_filtered_knn(*demo, index->label_index(), q, kL2).neighbors;
                const auto got = index->search(q, 64).neighbors;
                CHECK(got == expect);
            }
        }
    }
}

TEST_CASE("returned neighbors satisfy the predicate, are sorted and unique") {
    const auto multi = multi_label_data(600, 8, 3);
    const auto fixed = fixed_length_data(600, 8, 2, 3, 4);
    for (Algorithm a : kAllAlgorithms) {
        CAPTURE(to_string(a));
        const auto data = fixed_only(a) ? fixed : multi;
        const auto index = build(a, data);
        const std::vector<Constraint> cs = fixed_only(a)
                ? std::vector<Constraint>{Constraint::FixedLengthEquality}
                : std::vector<Constraint>{Constraint::Containment, Constraint::Equality, Constraint::Overlap};
        for (Constraint c : cs) {
            for (const auto& q : random_queries(*data, c, 20, 10, 5)) {
                for (std::uint32_t knob : index->default_sweep()) {
                    const auto out = index->search(q, knob);
                    REQUIRE(out.neighbors.size() <= q.k);
                    std::set<idx_t> seen;
                    for (std::size_t i = 0; i < out.neighbors.size(); ++i) {
                        const auto& nb = out.neighbors[i];
                        CHECK(satisfies(data->labels(nb.id), q.labels, c));
                        CHECK(seen.insert(nb.id).second);
                        CHECK(nb.distance == distance(kL2, data->vector(nb.id), std::span<const float>(q.embedding)));
                        if (i > 0) {
                            CHECK(!closer(nb, out.neighbors[i - 1]));
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("serialization round-trips and same-seed builds are identical") {
    const auto multi = multi_label_data(400, 8, 6);
    const auto fixed = fixed_length_data(400, 8, 2, 3, 7);
    for (Algorithm a : kAllAlgorithms) {
        CAPTURE(to_string(a));
        const auto data = fixed_only(a) ? fixed : multi;
        const auto index = build(a, data);
        const auto bytes = serialize_index(*index);
        const auto loaded = deserialize_index(bytes);
        CHECK(loaded->algorithm() == a);
        CHECK(loaded->params() == index->params());
        CHECK(serialize_index(*loaded) == bytes);
        CHECK(serialize_index(*build(a, data)) == bytes);
        const Constraint c = fixed_only(a) ? Constraint::FixedLengthEquality : Constraint::Containment;
        for (const auto& q : random_queries(*data, c, 10, 5, 8)) {
            CHECK(loaded->search(q, 32).neighbors == index->search(q, 32).neighbors);
        }
        auto truncated = bytes;
        truncated.pop_back();
        CHECK_THROWS_AS(deserialize_index(truncated), Error);
        auto padded = bytes;
        padded.push_back(0);
        CHECK_THROWS_AS(deserialize_index(padded), FormatError);
    }
}

TEST_CASE("label navigating graph matches the minimal-containment oracle") {
    // {1} -> {1,2} -> {1,2,3}; {1} -> {1,4}; {2} -> {1,2}; {5} isolated
    std::vector<LabelSet> labels = {{1, 2}, {1}, {1, 2, 3}, {1, 4}, {2}, {5}, {1, 2}, {1}};
    auto lng = group_by_label_set(labels);
    build_lng(lng);
    REQUIRE(lng.sets.size() == 6);
    CHECK(lng.members[*lng.find(LabelSet{1})] == std::vector<idx_t>{1, 7});
    CHECK(lng.members[*lng.find(LabelSet{1, 2})] == std::vector<idx_t>{0, 6});
    CHECK(lng.edge_count() == 4);
    const auto g1 = *lng.find(LabelSet{1});
    std::vector<LabelSet> kids;
    for (auto c : lng.children[g1]) {
        kids.push_back(lng.sets[c]);
    }
    std::sort(kids.begin(), kids.end());
    CHECK(kids == std::vector<LabelSet>{LabelSet{1, 2}, LabelSet{1, 4}});

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<LabelSet> sets;
        for (int i = 0; i < 80; ++i) {
            sets.push_back(testing::random_label_set(rng, 7, 4));
        }
        auto g = group_by_label_set(sets);
        build_lng(g);
        const std::size_t G = g.sets.size();
        auto strict = [&](std::size_t a, std::size_t b) { return a != b && g.sets[a].is_subset_of(g.sets[b]); };
        for (std::size_t a = 0; a < G; ++a) {
            std::set<std::uint32_t> expect;
            for (std::size_t b = 0; b < G; ++b) {
                if (!strict(a, b)) {
                    continue;
                }
                bool minimal = true;
                for (std::size_t m = 0; m < G && minimal; ++m) {
                    minimal = !(strict(a, m) && strict(m, b));
                }
                if (minimal) {
                    expect.insert(std::uint32_t(b));
                }
            }
            CHECK(std::set<std::uint32_t>(g.children[a].begin(), g.children[a].end()) == expect);
            for (auto b : g.children[a]) {
                const auto& ps = g.parents[b];
                CHECK(std::find(ps.begin(), ps.end(), a) != ps.end());
            }
        }
    }
}

TEST_CASE("UNG edges respect containment and entry groups are minimal supersets") {
    const auto data = multi_label_data(800, 8, 10);
    const auto index = build(Algorithm::Ung, data);
    const auto& ung = dynamic_cast<const UngIndex&>(*index);
    std::size_t edges = 0;
    for (idx_t u = 0; u < data->size(); ++u) {
        for (idx_t v : ung.adjacency()[u]) {
            ++edges;
            CHECK(data->labels(u).is_subset_of(data->labels(v)));
        }
    }
    CHECK(edges > 0);
    CHECK(ung.cross_edge_count() > 0);
    const auto& lng = ung.lng();
    for (std::uint32_t g = 0; g < lng.sets.size(); ++g) {
        const auto& m = lng.members[g];
        CHECK(std::find(m.begin(), m.end(), ung.group_entry(g)) != m.end());
    }

    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const LabelSet q = testing::random_label_set(rng, 6, 3);
        std::set<std::uint32_t> expect;
        for (std::uint32_t g = 0; g < lng.sets.size(); ++g) {
            if (!q.is_subset_of(lng.sets[g])) {
                continue;
            }
            bool minimal = true;
            for (std::uint32_t h = 0; h < lng.sets.size() && minimal; ++h) {
                minimal = !(h != g && q.is_subset_of(lng.sets[h]) && lng.sets[h].is_subset_of(lng.sets[g]));
            }
            if (minimal) {
                expect.insert(g);
            }
        }
        const auto got = ung.entry_groups(q);
        CHECK(std::set<std::uint32_t>(got.begin(), got.end()) == expect);
    }

    // empty query labels: every record qualifies under containment
    for (auto q : random_queries(*data, Constraint::Containment, 20, 10, 13)) {
        q.labels = {};
        const auto expect = exact_filtered_knn(*data, index->label_index(), q, kL2);
        const auto got = index->search(q, 200);
        std::vector<idx_t> ids;
        for (const auto& nb : got.neighbors) {
            ids.push_back(nb.id);
        }
        CHECK(recall_at_k(ids, expect.to_ground_truth(), 10) >= 0.9);
    }
}

TEST_CASE("Filtered-Vamana edges join records sharing a label") {
    const auto data = multi_label_data(800, 8, 14);
    const auto index = build(Algorithm::FilteredVamana, data);
    const auto& fv = dynamic_cast<const LabelVamanaIndex&>(*index);
    std::size_t edges = 0;
    for (idx_t u = 0; u < data->size(); ++u) {
        CHECK(fv.adjacency()[u].size() <= 24);
        for (idx_t v : fv.adjacency()[u]) {
            ++edges;
            CHECK(data->labels(u).intersects(data->labels(v)));
        }
    }
    CHECK(edges > 0);
    for (label_t x = 0; x < fv.start_points().size(); ++x) {
        const idx_t s = fv.start_points()[x];
        if (s != LabelVamanaIndex::kNoStart) {
            CHECK(data->labels(s).contains(x));
        } else {
            CHECK(index->label_index().bitset(x).count() == 0);
        }
    }
}

TEST_CASE("Stitched-Vamana subgraphs stay inside their label") {
    const auto data = multi_label_data(800, 8, 15);
    const auto index = build(Algorithm::StitchedVamana, data);
    const auto& sv = dynamic_cast<const LabelVamanaIndex&>(*index);
    REQUIRE(!sv.label_subgraphs().empty());
    for (const auto& sub : sv.label_subgraphs()) {
        CHECK(sub.members == index->label_index().bitset(sub.label).positions());
        for (std::size_t i = 0; i < sub.members.size(); ++i) {
            CHECK(sub.adjacency[i].size() <= 16);
            for (idx_t v : sub.adjacency[i]) {
                CHECK(data->labels(v).contains(sub.label));
                CHECK(v != sub.members[i]);
            }
        }
    }
    for (idx_t u = 0; u < data->size(); ++u) {
        const auto& list = sv.adjacency()[u];
        CHECK(list.size() <= 32);
        CHECK(std::set<idx_t>(list.begin(), list.end()).size() == list.size());
        for (idx_t v : list) {
            CHECK(data->labels(u).intersects(data->labels(v)));
        }
    }
    const auto loaded = deserialize_index(serialize_index(*index));
    CHECK(dynamic_cast<const LabelVamanaIndex&>(*loaded).label_subgraphs().empty());
}

TEST_CASE("IVF lists partition the records by nearest centroid") {
    const auto data = multi_label_data(1000, 8, 16);
    const auto index = build(Algorithm::PostFilterIvfPq, data);
    const auto& ivf = dynamic_cast<const PostFilterIvfPqIndex&>(*index).ivf();
    std::vector<int> seen(data->size(), 0);
    for (std::size_t l = 0; l < ivf.nlist(); ++l) {
        for (idx_t id : ivf.list(l)) {
            ++seen[id];
            CHECK(ivf.coarse().assign(data->vector(id)) == l);
        }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(index->default_sweep() == std::vector<std::uint32_t>{1, 2, 4, 8, 16});
}

TEST_CASE("fused metric") {
    FusedMetric f{kL2, 2.0f, 2};
    // offset encoding with 3 values per position
    const LabelSet a{0, 3}, b{1, 3}, c{2, 5};
    CHECK(f.hamming(a, a) == 0);
    CHECK(f.hamming(a, b) == 1);
    CHECK(f.hamming(a, c) == 2);
    const std::vector<float> x{0, 0}, y{3, 4};
    CHECK(f(x, a, y, a) == doctest::Approx(25));
    CHECK(f(x, a, y, c) == doctest::Approx(29));
    CHECK_THROWS_AS(f.hamming(a, LabelSet{0}), ConstraintError);

    const auto data = fixed_length_data(300, 4, 2, 3, 17);
    const float lambda = auto_lambda(*data, kL2, 2, 500, 1);
    CHECK(lambda > 0);
    CHECK(auto_lambda(*data, kL2, 2, 500, 1) == lambda);
}

TEST_CASE("NHQ with lambda 0 ranks by vector distance and reaches the oracle") {
    const auto data = fixed_length_data(1500, 8, 2, 3, 18);
    const auto index = build(Algorithm::Nhq, data, {{"lambda", 0}});
    CHECK(dynamic_cast<const NhqIndex&>(*index).fused().lambda == 0.0f);
    const auto qs = random_queries(*data, Constraint::FixedLengthEquality, 50, 10, 19);
    CHECK(mean_recall(*index, qs, 200) >= 0.95);
    const auto tuned = build(Algorithm::Nhq, data);
    CHECK(dynamic_cast<const NhqIndex&>(*tuned).fused().lambda > 0.0f);
    CHECK(mean_recall(*tuned, qs, 200) >= 0.95);
}

TEST_CASE("CAPS partitions clusters by frequent labels") {
    const auto data = fixed_length_data(1200, 8, 2, 3, 20);
    const auto index = build(Algorithm::Caps, data);
    const auto& caps = dynamic_cast<const CapsIndex&>(*index);
    std::vector<int> seen(data->size(), 0);
    for (const auto& cluster : caps.clusters()) {
        REQUIRE(!cluster.empty());
        CHECK(cluster.size() <= 6);
        CHECK(!cluster.back().label.has_value());
        std::vector<label_t> earlier;
        for (const auto& sub : cluster) {
            for (idx_t id : sub.members) {
                ++seen[id];
                if (sub.label) {
                    CHECK(data->labels(id).contains(*sub.label));
                }
                for (label_t x : earlier) {
                    CHECK(!data->labels(id).contains(x));
                }
            }
            if (sub.label) {
                earlier.push_back(*sub.label);
            }
        }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));

    const auto flat = build(Algorithm::Caps, data, {{"h", 1}});
    for (const auto& cluster : dynamic_cast<const CapsIndex&>(*flat).clusters()) {
        CHECK(cluster.size() == 1);
    }

    const auto kc = std::uint32_t(caps.coarse().k());
    for (const auto& q : random_queries(*data, Constraint::FixedLengthEquality, 30, 10, 21)) {
        const auto expect = exact_filtered_knn(*data, index->label_index(), q, kL2).neighbors;
        CHECK(index->search(q, kc).neighbors == expect);
        CHECK(flat->search(q, kc).neighbors == expect);
    }
}

TEST_CASE("post-filter round bound and saturated equality") {
    const auto data = multi_label_data(1000, 8, 22);
    const auto hnsw = build(Algorithm::PostFilterHnsw, data, {{"l_max", 320}});
    for (Constraint c : {Constraint::Containment, Constraint::Equality}) {
        for (const auto& q : random_queries(*data, c, 40, 10, 23)) {
            for (std::uint32_t l0 : {10u, 20u, 40u}) {
                const auto out = hnsw->search(q, l0);
                const auto bound = std::uint32_t(std::ceil(std::log2(320.0 / l0))) + 1;
                CHECK(out.rounds <= bound);
                CHECK(out.final_scope <= 320);
            }
        }
    }

    const auto saturated = build(Algorithm::PostFilterHnsw, data);
    const auto ivf = build(Algorithm::PostFilterIvfPq, data, {{"full_rerank", 1}});
    const auto nlist = std::uint32_t(dynamic_cast<const PostFilterIvfPqIndex&>(*ivf).ivf().nlist());
    for (Constraint c : {Constraint::Containment, Constraint::Equality, Constraint::Overlap}) {
        for (const auto& q : random_queries(*data, c, 30, 10, 24)) {
            const auto expect = exact_filtered_knn(*data, saturated->label_index(), q, kL2).neighbors;
            CHECK(saturated->search(q, std::uint32_t(data->size())).neighbors == expect);
            CHECK(ivf->search(q, nlist).neighbors == expect);
        }
    }
}

TEST_CASE("ACORN degree bounds and two-hop expansion") {
    const auto data = multi_label_data(2000, 8, 25);
    const auto gamma = build(Algorithm::AcornGamma, data);
    CHECK(dynamic_cast<const AcornIndex&>(*gamma).graph().max_degree(0) <= 32);
    const auto one = build(Algorithm::AcornOne, data);
    const auto& acorn1 = dynamic_cast<const AcornIndex&>(*one);
    CHECK(acorn1.graph().max_degree(0) <= 16);

    // equality filters on three-label sets are sparse
    auto qs = random_queries(*data, Constraint::Equality, 200, 10, 26);
    std::vector<FilteredQuery> sparse;
    for (const auto& q : qs) {
        const auto bm = one->make_bitmap(q);
        const double s = double(bm.count()) / double(data->size());
        if (bm.count() >= 10 && s < 0.05) {
            sparse.push_back(q);
        }
    }
    REQUIRE(sparse.size() >= 10);
    double two = 0, single = 0;
    for (const auto& q : sparse) {
        const auto truth = exact_filtered_knn(*data, one->label_index(), q, kL2).to_ground_truth();
        const auto bm = one->make_bitmap(q);
        auto ids = [](const SearchOutput& o) {
            std::vector<idx_t> out;
            for (const auto& nb : o.neighbors) {
                out.push_back(nb.id);
            }
            return out;
        };
        two += recall_at_k(ids(acorn1.search_with(q, 40, bm, HopMode::TwoHop)), truth, 10);
        single += recall_at_k(ids(acorn1.search_with(q, 40, bm, HopMode::OneHop)), truth, 10);
    }
    CHECK(two >= single);
}

TEST_CASE("denser ACORN-gamma graphs recall at least as much at 5% selectivity") {
    const std::size_t n = 10000, dim = 32;
    const auto data = shared(Dataset(dim, gen_clustered_vectors(n, dim, 16, 27), gen_skewed_labels(n, 32, 28)));
    const auto seeds = queries_near_selectivity(data->all_labels(), Constraint::Containment, 0.05, 200, 29);
    std::mt19937_64 rng(30);
    std::normal_distribution<float> g(0, 1);
    std::vector<FilteredQuery> qs;
    for (const auto& labels : seeds.labels) {
        FilteredQuery q;
        for (std::size_t i = 0; i < dim; ++i) {
            q.embedding.push_back(1.5f * g(rng));
        }
        q.labels = labels;
        q.constraint = Constraint::Containment;
        qs.push_back(std::move(q));
    }
    // graph search only, no exact fallback
    const auto dense = build_index(Algorithm::AcornGamma, data, {{"gamma", 4}, {"min_selectivity", 0}});
    const auto sparse = build_index(Algorithm::AcornGamma, data, {{"gamma", 1}, {"min_selectivity", 0}});
    CHECK(mean_recall(*dense, qs, 40) >= mean_recall(*sparse, qs, 40));

    // below the default 1/gamma threshold the answer is exact
    const auto fallback = build_index(Algorithm::AcornGamma, data, {{"gamma", 4}});
    for (const auto& q : qs) {
        CHECK(fallback->search(q, 10).neighbors == exact_filtered_knn(*data, fallback->label_index(), q, kL2).neighbors);
    }
}

TEST_CASE("unsupported constraints and bad inputs are rejected") {
    const auto multi = multi_label_data(200, 4, 27);
    const auto fixed = fixed_length_data(200, 4, 2, 3, 28);
    CHECK_THROWS_AS(build(Algorithm::Nhq, multi), ConstraintError);
    CHECK_THROWS_AS(build(Algorithm::Caps, multi), ConstraintError);
    const auto nhq = build(Algorithm::Nhq, fixed);
    const auto caps = build(Algorithm::Caps, fixed);
    for (Constraint c : {Constraint::Containment, Constraint::Equality, Constraint::Overlap}) {
        auto q = random_queries(*fixed, c, 1, 5, 29)[0];
        CHECK_THROWS_AS(nhq->search(q, 10), UnsupportedError);
        CHECK_THROWS_AS(caps->search(q, 10), UnsupportedError);
    }
    auto q = random_queries(*fixed, Constraint::FixedLengthEquality, 1, 5, 30)[0];
    q.labels = LabelSet{0};
    CHECK_THROWS_AS(nhq->search(q, 10), ConstraintError);

    const auto bf = build(Algorithm::BruteForce, multi);
    auto fq = random_queries(*multi, Constraint::FixedLengthEquality, 1, 5, 31)[0];
    CHECK_THROWS_AS(bf->search(fq, 0), ConstraintError);
    auto wrong_dim = random_queries(*multi, Constraint::Containment, 1, 5, 32)[0];
    wrong_dim.embedding.push_back(0);
    CHECK_THROWS_AS(bf->search(wrong_dim, 0), ParameterError);
    CHECK_THROWS_AS(build(Algorithm::Ung, multi, {{"bogus", 1}}), ParameterError);
    CHECK_THROWS_AS(build(Algorithm::AcornGamma, multi, {{"gamma", 0}}), ParameterError);
    CHECK_THROWS_AS(build(Algorithm::PostFilterIvfPq, multi, {{"m", 3}}), ParameterError);
}
