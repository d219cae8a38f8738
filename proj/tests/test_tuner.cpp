#include <random>
#include <set>

#include "doctest.h"
#include "fanns/tuner.h"
#include "fixtures.h"
#include "oracles.h"
#include "json.hpp"

using namespace fanns;

namespace {

ConfigEvaluation eval(std::string name, std::vector<double> qps, bool valid = true) {
    ConfigEvaluation e;
    e.params = {{name, 1}};
    e.qps_at_targets = std::move(qps);
    e.valid = valid;
    return e;
}

}  // namespace

TEST_CASE("parameter space enumeration and partition") {
    ParamSpace s;
    s.build = {{"a", {1, 2, 3, 4}}, {"b", {10, 20, 30, 40}}};
    const auto configs = s.configs();
    REQUIRE(configs.size() == 16);
    CHECK(configs[0] == ParamMap{{"a", 1}, {"b", 10}});
    CHECK(configs[1] == ParamMap{{"a", 1}, {"b", 20}});

    const auto one = partition_space(s, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].configs == configs);

    const auto four = partition_space(s, 4);
    REQUIRE(four.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(four[i].configs.size() == 4);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(four[i].configs[j].at("a") == double(i + 1));
            CHECK(four[i].configs[j].at("b") == double(10 * (j + 1)));
        }
    }
    CHECK(partition_space(s, 0).size() == 8);

    std::vector<std::string> warnings;
    CHECK(partition_space(s, 40, &warnings).size() == 16);
    CHECK(warnings.size() == 1);

    ParamSpace empty_grid;
    empty_grid.build = {{"a", {}}};
    CHECK_THROWS_AS(empty_grid.configs(), ParameterError);
    CHECK(ParamSpace{}.configs().size() == 1);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        ParamSpace r;
        std::uniform_int_distribution<int> axes(1, 3), len(1, 5), subs(1, 20);
        const int A = axes(rng);
        for (int a = 0; a < A; ++a) {
            std::vector<double> grid;
            for (int v = len(rng); v > 0; --v) {
                grid.push_back(v);
            }
            r.build["p" + std::to_string(a)] = grid;
        }
        const auto all = r.configs();
        std::vector<ParamMap> joined;
        for (const auto& sub : partition_space(r, std::size_t(subs(rng)))) {
            CHECK(!sub.configs.empty());
            joined.insert(joined.end(), sub.configs.begin(), sub.configs.end());
        }
        CHECK(joined == all);
        CHECK(std::set<ParamMap>(all.begin(), all.end()).size() == all.size());
    }

    for (Algorithm a : kAllAlgorithms) {
        for (const auto& p : default_space(a).configs()) {
            CHECK_NOTHROW(merge_params(default_params(a), p, to_string(a)));
        }
    }
}

TEST_CASE("curve averaging") {
    CHECK(average_curves({{{0.8, 1000}}, {{0.8, 500}}}) == Curve{{0.8, 750}});
    const Curve c{{0.5, 10}, {0.9, 3}};
    CHECK(average_curves({c}) == c);
    CHECK(average_curves({c, c}) == c);
    CHECK_THROWS_AS(average_curves({c, Curve{{0.1, 1}}}), ParameterError);
    CHECK_THROWS_AS(average_curves({}), ParameterError);
}

TEST_CASE("interpolate_qps examples") {
    const double t1[] = {0.8};
    CHECK(interpolate_qps({{0.7, 1000}, {0.9, 500}}, t1)[0] == doctest::Approx(750));
    const double t2[] = {0.9};
    CHECK(interpolate_qps({{0.7, 1000}, {0.9, 500}}, t2)[0] == 500);
    const double t3[] = {0.95};
    CHECK(interpolate_qps({{0.6, 1000}, {0.85, 500}}, t3)[0] == 0);
    const double t4[] = {0.1};
    CHECK(interpolate_qps({{0.6, 1000}, {0.85, 500}}, t4)[0] == 1000);
    CHECK_THROWS_AS(interpolate_qps({}, t1), ParameterError);
}

TEST_CASE("interpolate_qps is exact on piecewise-linear curves") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = testing::piecewise_curve(rng);
        CHECK(interpolate_qps(c.curve, c.targets) == c.expect);
    }
}

TEST_CASE("interpolation is monotone under pointwise domination") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        Curve b, a;
        for (int i = 0; i < 6; ++i) {
            const double r = u(rng);
            const double q = 1000 * u(rng);
            b.push_back({r, q});
            a.push_back({r, q + 50 * u(rng)});
        }
        const auto qa = interpolate_qps(a, kDefaultTargets);
        const auto qb = interpolate_qps(b, kDefaultTargets);
        for (std::size_t t = 0; t < qa.size(); ++t) {
            CHECK(qa[t] >= qb[t]);
        }
    }
}

TEST_CASE("rank_and_select examples") {
    std::vector<ConfigEvaluation> single{eval("a", {1, 2, 3})};
    CHECK(rank_and_select(single) == 0u);
    CHECK(single[0].rank_sum == 3);

    std::vector<ConfigEvaluation> dom{eval("b", {1, 1, 1}), eval("a", {5, 4, 3})};
    CHECK(rank_and_select(dom) == 1u);

    // a wins 0.8 and 0.9, b wins 0.95 narrowly: sums 4, 5, 9
    std::vector<ConfigEvaluation> mixed{eval("a", {900, 800, 500}), eval("b", {850, 700, 510}),
                                        eval("c", {100, 100, 400})};
    CHECK(rank_and_select(mixed) == 0u);
    CHECK(mixed[0].ranks == std::vector<std::size_t>{1, 1, 2});
    CHECK(mixed[1].ranks == std::vector<std::size_t>{2, 2, 1});
    CHECK(mixed[2].ranks == std::vector<std::size_t>{3, 3, 3});
    // with c ahead of a at 0.95 the sums tie at 5 and b's top-target qps wins
    mixed[2].qps_at_targets[2] = 505;
    CHECK(rank_and_select(mixed) == 1u);

    // equal rank sums: higher qps at the top target wins
    std::vector<ConfigEvaluation> tie{eval("a", {10, 1}), eval("b", {1, 10})};
    CHECK(rank_and_select(tie) == 1u);
    // then the lexicographic params
    std::vector<ConfigEvaluation> tie2{eval("b", {5, 5}), eval("a", {5, 5})};
    CHECK(rank_and_select(tie2) == 1u);

    std::vector<ConfigEvaluation> invalid{eval("a", {}, false), eval("b", {0, 0, 0})};
    CHECK(rank_and_select(invalid) == 1u);
    CHECK(invalid[0].ranks == std::vector<std::size_t>{2, 2, 2});
    std::vector<ConfigEvaluation> none{eval("a", {}, false)};
    CHECK(!rank_and_select(none).has_value());
}

TEST_CASE("rank_and_select matches the brute-force rank-sum oracle") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        auto evals = testing::random_evaluations(rng);
        const auto expect = testing::brute_select(evals);
        CHECK(rank_and_select(evals) == expect);
    }
}

TEST_CASE("sampling and end-to-end tuning on a small dataset") {
    CHECK(sample_ids(100, 0.1, 5000, 1).size() == 100);
    const auto ids = sample_ids(100000, 0.1, 5000, 1);
    CHECK(ids.size() == 10000);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    CHECK(sample_ids(20000, 0.1, 5000, 1).size() == 5000);
    CHECK_THROWS_AS(sample_ids(10, 0, 1, 1), ParameterError);

    std::mt19937_64 rng(10);
    const Dataset full = testing::random_dataset(rng, 3000, 8, 5, 2);
    const auto sample = std::make_shared<const Dataset>(full.subset(sample_ids(full.size(), 0.2, 600, 2)));
    CHECK(sample->size() == 600);

    Workload w;
    w.scenario = Constraint::Containment;
    w.k_max = 10;
    std::uniform_int_distribution<idx_t> pick(0, idx_t(full.size() - 1));
    for (int i = 0; i < 40; ++i) {
        FilteredQuery q;
        const auto v = full.vector(pick(rng));
        q.embedding.assign(v.begin(), v.end());
        q.labels = full.labels(pick(rng));
        q.constraint = w.scenario;
        w.queries.push_back(q);
    }
    const Workload ws = resample_workload(w, *sample, 10, Metric::SquaredEuclidean, 1);
    CHECK(ws.size() == 40);
    Workload eq = ws;
    eq.scenario = Constraint::Equality;
    for (auto& q : eq.queries) {
        q.constraint = Constraint::Equality;
    }
    eq = resample_workload(eq, *sample, 10, Metric::SquaredEuclidean, 1);

    ParamSpace space;
    space.build = {{"M", {4, 8}}, {"ef_construction", {16, 32}}};
    space.sweep = {10, 40};
    TuneOptions opt;
    opt.n_sub = 2;
    opt.warmup = 5;
    const auto report = tune(Algorithm::AcornOne, space, sample, {ws, eq}, opt);
    REQUIRE(report.subspaces.size() == 2);
    for (const auto& s : report.subspaces) {
        REQUIRE(s.selected.has_value());
        CHECK(s.evaluations.size() == 2);
        for (const auto& e : s.evaluations) {
            CHECK(e.valid);
            CHECK(e.scenario_curves.size() == 2);
            CHECK(e.averaged.size() == 2);
            CHECK(e.qps_at_targets.size() == 3);
        }
    }
    const auto j = nlohmann::json::parse(report.to_json());
    CHECK(j["algorithm"] == "acorn-1");
    CHECK(j["subspaces"].size() == 2);

    // invalid builds do not abort the subspace
    ParamSpace bad;
    bad.build = {{"M", {1, 8}}};
    const auto r2 = tune(Algorithm::AcornOne, bad, sample, {ws}, opt);
    CHECK(r2.subspaces.size() == 2);
    CHECK(!r2.subspaces[0].evaluations[0].valid);
    CHECK(!r2.subspaces[0].selected.has_value());
    CHECK(r2.subspaces[1].selected.has_value());
    CHECK_THROWS_AS(tune(Algorithm::Nhq, space, sample, {ws}, opt), ParameterError);
}
