#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <unistd.h>

#include "doctest.h"
#include "fanns/label_filter.h"
#include "fanns/serialize.h"
#include "fanns/workload.h"
#include "fixtures.h"

using namespace fanns;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("fanns_workload_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("fvecs round trip and malformed input") {
    TempDir tmp;
    Matrix m{3, {1, 2, 3, 4, 5, 6}};
    save_fvecs(tmp.path / "a.fvecs", m);
    CHECK(fs::file_size(tmp.path / "a.fvecs") == 2 * (4 + 12));
    CHECK(load_fvecs(tmp.path / "a.fvecs") == m);

    Matrix one{2, {0.5f, -1}};
    save_fvecs(tmp.path / "b.fvecs", one);
    CHECK(load_fvecs(tmp.path / "b.fvecs").rows() == 1);

    write_file_bytes(tmp.path / "empty.fvecs", {});
    CHECK(load_fvecs(tmp.path / "empty.fvecs").rows() == 0);

    auto bytes = read_file_bytes(tmp.path / "a.fvecs");
    bytes.resize(bytes.size() - 2);
    write_file_bytes(tmp.path / "trunc.fvecs", bytes);
    CHECK_THROWS_AS(load_fvecs(tmp.path / "trunc.fvecs"), FormatError);

    // second record claims dimension 2
    BinaryWriter w;
    w.put<std::int32_t>(1);
    w.put<float>(1);
    w.put<std::int32_t>(2);
    w.put<float>(1);
    w.put<float>(2);
    write_file_bytes(tmp.path / "mixed.fvecs", w.bytes());
    try {
        load_fvecs(tmp.path / "mixed.fvecs");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 8") != std::string::npos);
    }
}

TEST_CASE("label files remap raw ids densely") {
    TempDir tmp;
    write_text(tmp.path / "l.txt", "2,1,2\n\n10,700,10\n 700 \n");
    const auto lf = load_labels(tmp.path / "l.txt");
    REQUIRE(lf.sets.size() == 4);
    CHECK(lf.mapping.raw_ids() == std::vector<std::int64_t>{1, 2, 10, 700});
    CHECK(lf.sets[0] == LabelSet{0, 1});
    CHECK(lf.sets[1].empty());
    CHECK(lf.sets[2] == LabelSet{2, 3});
    CHECK(lf.sets[3] == LabelSet{3});

    // {10,700,10} alone remaps to {0,1}
    write_text(tmp.path / "m.txt", "10,700,10\n");
    CHECK(load_labels(tmp.path / "m.txt").sets[0] == LabelSet{0, 1});

    write_text(tmp.path / "bad.txt", "1\n2,x\n");
    try {
        load_labels(tmp.path / "bad.txt");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }

    save_labels(tmp.path / "out.txt", lf.sets, lf.mapping);
    const auto again = load_labels(tmp.path / "out.txt");
    CHECK(again.sets == lf.sets);
    CHECK(LabelMapping::load(tmp.path / "out.txt.map") == lf.mapping);

    // unknown raw ids land past the universe
    const LabelSet unknown = lf.mapping.to_dense({5, 1});
    CHECK(unknown == LabelSet{0, 4});
    CHECK_THROWS_AS(lf.mapping.to_raw(LabelSet{9}), ParameterError);
}

TEST_CASE("dataset files must agree in row count") {
    TempDir tmp;
    save_fvecs(tmp.path / "v.fvecs", Matrix{2, {0, 0, 1, 1}});
    write_text(tmp.path / "l.txt", "5\n6\n");
    LabelMapping map;
    const Dataset d = load_dataset_files(tmp.path / "v.fvecs", tmp.path / "l.txt", &map);
    CHECK(d.size() == 2);
    CHECK(map.raw_ids() == std::vector<std::int64_t>{5, 6});
    write_text(tmp.path / "l3.txt", "5\n6\n7\n");
    CHECK_THROWS_AS(load_dataset_files(tmp.path / "v.fvecs", tmp.path / "l3.txt"), FormatError);
}

TEST_CASE("fixed-length generator covers all combinations near 1/81") {
    const std::size_t n = 20000;
    const auto sets = gen_fixed_length_labels(n, 4, 3, 7);
    std::map<LabelSet, std::size_t> counts;
    for (const auto& s : sets) {
        REQUIRE(s.size() == 4);
        const auto pos = decode_fixed_length(s, 3);
        CHECK(encode_fixed_length(pos, 3) == s);
        ++counts[s];
    }
    CHECK(counts.size() == 81);
    const double p = 1.0 / 81;
    const double sd = std::sqrt(p * (1 - p) / double(n));
    for (const auto& [s, c] : counts) {
        CHECK(std::abs(double(c) / double(n) - p) <= 4 * sd);
    }
    const auto single = gen_fixed_length_labels(10, 2, 1, 1);
    for (const auto& s : single) {
        CHECK(s == LabelSet{0, 1});
    }
    CHECK(gen_fixed_length_labels(50, 4, 3, 7) == gen_fixed_length_labels(50, 4, 3, 7));
    std::vector<std::uint32_t> bad{3};
    CHECK_THROWS_AS(encode_fixed_length(bad, 3), ParameterError);
    CHECK_THROWS_AS(decode_fixed_length(LabelSet{0, 1}, 3), ConstraintError);
}

TEST_CASE("skewed labels favour low ids") {
    const auto sets = gen_skewed_labels(5000, 20, 3);
    std::vector<std::size_t> freq(20);
    for (const auto& s : sets) {
        REQUIRE(!s.empty());
        REQUIRE(s.size() <= 3);
        for (label_t x : s) {
            ++freq.at(x);
        }
    }
    CHECK(freq[0] > freq[5]);
    CHECK(freq[5] > freq[19]);
}

TEST_CASE("length stratification") {
    std::vector<LabelSet> base;
    for (label_t i = 0; i < 30; ++i) {
        std::vector<label_t> ls;
        for (label_t j = 0; j <= i % 3; ++j) {
            ls.push_back(j);
        }
        base.push_back(LabelSet::from_unsorted(ls));
    }
    const auto q = stratify_by_length(base, Constraint::Containment, 5, 1);
    REQUIRE(q.labels.size() == 15);
    CHECK(q.warnings.empty());
    for (std::size_t i = 0; i < 15; ++i) {
        CHECK(q.labels[i].size() == i / 5 + 1);
        CHECK(q.strata[i] == std::array<const char*, 3>{"short", "medium", "long"}[i / 5]);
    }

    // every record the same length: later groups fall back with warnings
    std::vector<LabelSet> flat(10, LabelSet{1, 2});
    const auto f = stratify_by_length(flat, Constraint::Containment, 2, 1);
    CHECK(f.labels.size() == 6);
    CHECK(f.warnings.size() == 2);
    CHECK_THROWS_AS(stratify_by_length({}, Constraint::Containment, 2, 1), ParameterError);
}

TEST_CASE("selectivity stratification buckets are ordered") {
    std::mt19937_64 rng(11);
    std::vector<LabelSet> base;
    for (int i = 0; i < 2000; ++i) {
        base.push_back(testing::random_label_set(rng, 30, 4));
    }
    const std::vector<double> pct{10, 50, 90};
    const auto q = stratify_by_selectivity(base, Constraint::Equality, pct, 20, 5);
    REQUIRE(q.labels.size() == 60);
    const InvertedLabelIndex index(base);
    auto sel = [&](const LabelSet& s) { return filter_map(index, s, Constraint::Equality, base).count(); };
    std::size_t max_prev = 0;
    for (std::size_t g = 0; g < 3; ++g) {
        std::size_t lo = SIZE_MAX, hi = 0;
        for (std::size_t i = g * 20; i < g * 20 + 20; ++i) {
            lo = std::min(lo, sel(q.labels[i]));
            hi = std::max(hi, sel(q.labels[i]));
        }
        if (g > 0) {
            CHECK(lo >= max_prev);
        }
        max_prev = hi;
    }
    std::vector<double> bad{120};
    CHECK_THROWS_AS(stratify_by_selectivity(base, Constraint::Equality, bad, 1, 1), ParameterError);

    const auto near = queries_near_selectivity(base, Constraint::Containment, 0.1, 10, 3);
    CHECK(near.labels.size() == 10);
    for (const auto& s : near.labels) {
        const double sigma = double(filter_map(index, s, Constraint::Containment, base).count()) / 2000.0;
        CHECK(sigma > 0.05);
        CHECK(sigma < 0.2);
    }
}

TEST_CASE("ground truth drops queries below k_max and round-trips") {
    TempDir tmp;
    const Dataset demo = testing::demo_dataset();
    Workload w;
    w.dataset = "demo";
    w.scenario = Constraint::Containment;
    w.k_max = 3;
    for (LabelSet ls : {LabelSet{1, 2}, LabelSet{3}, LabelSet{1}}) {
        FilteredQuery q = testing::demo_query(Constraint::Containment);
        q.labels = ls;
        w.queries.push_back(q);
        w.strata.push_back("s");
    }
    attach_ground_truth(w, demo, Metric::SquaredEuclidean);
    // {3} matches only v1 and v4, fewer than k_max
    REQUIRE(w.size() == 2);
    CHECK(w.satisfied == std::vector<std::size_t>{4, 5});
    CHECK(w.truth[0].ids == std::vector<idx_t>{2, 6, 0});

    Workload none = w;
    none.k_max = 50;
    CHECK_THROWS_AS(attach_ground_truth(none, demo, Metric::SquaredEuclidean), Error);

    Workload loose = w;
    loose.k_max = 50;
    loose.guarantee = false;
    attach_ground_truth(loose, demo, Metric::SquaredEuclidean);
    CHECK(loose.size() == 2);

    const LabelMapping map(std::vector<std::int64_t>{100, 101, 102, 103, 104});
    save_workload(tmp.path / "wl", w, map);
    CHECK(read_file_bytes(tmp.path / "wl" / "gt.bin").size() == 2 * (4 + 3 * 8));
    const Workload back = load_workload(tmp.path / "wl" / "manifest.json");
    CHECK(back.dataset == "demo");
    CHECK(back.k_max == 3);
    CHECK(back.truth == w.truth);
    CHECK(back.satisfied == w.satisfied);
    REQUIRE(back.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(back.queries[i].embedding == w.queries[i].embedding);
        CHECK(back.queries[i].labels == w.queries[i].labels);
    }
    CHECK(load_workload(tmp.path / "wl").size() == 2);
}

TEST_CASE("hold out splits records without overlap") {
    std::mt19937_64 rng(2);
    const Dataset d = testing::random_dataset(rng, 50, 4, 5, 2);
    const HeldOut h = hold_out(d, 10, 9);
    CHECK(h.base.size() == 40);
    CHECK(h.queries.rows() == 10);
    CHECK(h.query_labels.size() == 10);
    CHECK_THROWS_AS(hold_out(d, 50, 1), ParameterError);
}
