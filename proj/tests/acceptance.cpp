// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <omp.h>
#include <time.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fanns/exact_oracle.h"
#include "fanns/harness.h"
#include "fanns/label_filter.h"
#include "fanns/strategies.h"
#include "fanns/tuner.h"
#include "fanns/workload.h"
#include "fixtures.h"
#include "oracles.h"

using namespace fanns;

namespace {

constexpr Metric kL2 = Metric::SquaredEuclidean;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int number, const char* name, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", number, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double x, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

/// CPU time of the calling thread; single-threaded builds are timed with it
/// so other load on the machine does not count.
double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return double(ts.tv_sec) + 1e-9 * double(ts.tv_nsec);
}

int threads() {
    return std::max(1, omp_get_max_threads());
}

/// First `n` rows as base records, the rest as query vectors.
struct Split {
    std::shared_ptr<const Dataset> base;
    std::vector<std::vector<float>> queries;
    std::vector<LabelSet> query_labels;
};

Split split(std::size_t n, std::size_t dim, const std::vector<float>& vecs, const std::vector<LabelSet>& labels) {
    Split s;
    s.base = std::make_shared<const Dataset>(dim, std::vector<float>(vecs.begin(), vecs.begin() + std::ptrdiff_t(n * dim)),
                                             std::vector<LabelSet>(labels.begin(), labels.begin() + std::ptrdiff_t(n)));
    for (std::size_t i = n; i < labels.size(); ++i) {
        s.queries.emplace_back(vecs.begin() + std::ptrdiff_t(i * dim), vecs.begin() + std::ptrdiff_t((i + 1) * dim));
        s.query_labels.push_back(labels[i]);
    }
    return s;
}

Workload make_workload(const Split& s, Constraint c, const std::vector<LabelSet>& labels, std::uint32_t k_max) {
    Workload w;
    w.dataset = "acceptance";
    w.scenario = c;
    w.k_max = k_max;
    w.guarantee = true;
    for (std::size_t i = 0; i < labels.size() && i < s.queries.size(); ++i) {
        w.queries.push_back(FilteredQuery{s.queries[i], labels[i], 10, c});
    }
    attach_ground_truth(w, *s.base, kL2, threads());
    return w;
}

double workload_recall(const StrategyIndex& index, const Workload& w, std::uint32_t knob) {
    return mean_recall(search_batch(index, w.queries, knob, 10, threads()), w.truth, 10);
}

// ---------------------------------------------------------------------------
// 10k-point multi-label bench shared by the graph, audit and monotonicity
// criteria.

const std::vector<std::uint32_t> kGraphSweep = {10, 20, 40, 80, 160, 320, 640};
const double kSigmas[] = {0.01, 0.05, 0.25};
const Algorithm kGraphStrategies[] = {Algorithm::AcornOne, Algorithm::AcornGamma, Algorithm::Ung,
                                      Algorithm::FilteredVamana, Algorithm::StitchedVamana};
const Constraint kGeneral[] = {Constraint::Containment, Constraint::Equality, Constraint::Overlap};

struct GraphBench {
    Split split;
    std::map<std::pair<int, Constraint>, Workload> workloads;  // (sigma index, scenario)
    std::map<Algorithm, std::unique_ptr<StrategyIndex>> indexes;
    double seconds = 0;  // data, builds and sweeps
    // recall per sweep value
    std::map<std::tuple<Algorithm, int, Constraint>, std::vector<double>> recall;
};

GraphBench& graph_bench() {
    static GraphBench b = [] {
        GraphBench g;
        const auto start = Clock::now();
        const std::size_t n = 10000, dim = 32, nq = 100;
        g.split = split(n, dim, gen_clustered_vectors(n + nq, dim, 16, 101), gen_skewed_labels(n + nq, 32, 102));
        for (int si = 0; si < 3; ++si) {
            for (Constraint c : kGeneral) {
                const auto seeds = queries_near_selectivity(g.split.base->all_labels(), c, kSigmas[si], nq,
                                                            std::uint64_t(103 + si));
                g.workloads[{si, c}] = make_workload(g.split, c, seeds.labels, 10);
            }
        }
        BuildOptions bo;
        bo.threads = threads();
        for (Algorithm a : kGraphStrategies) {
            g.indexes[a] = build_index(a, g.split.base, {}, bo);
            for (const auto& [key, w] : g.workloads) {
                auto& r = g.recall[{a, key.first, key.second}];
                for (std::uint32_t l : kGraphSweep) {
                    r.push_back(workload_recall(*g.indexes[a], w, l));
                }
            }
        }
        g.seconds = seconds_since(start);
        return g;
    }();
    return b;
}

// ---------------------------------------------------------------------------

Outcome bitset_semantics() {
    std::mt19937_64 rng(1);
    std::size_t maps = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 2048)(rng);
        const std::size_t universe = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
        std::vector<LabelSet> labels;
        std::size_t L = 0, V = 0;
        if (trial % 2) {
            L = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
            V = std::max<std::size_t>(1, 16 / L);
            for (std::size_t i = 0; i < n; ++i) {
                labels.push_back(testing::random_fixed_label_set(rng, L, V));
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                labels.push_back(testing::random_label_set(rng, universe, 4));
            }
        }
        const InvertedLabelIndex index(labels);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int qi = 0; qi < 8; ++qi) {
            // half the queries are base sets so equality has survivors
            LabelSet q = qi % 2 ? labels[pick(rng)]
                                : (L ? testing::random_fixed_label_set(rng, L, V)
                                     : testing::random_label_set(rng, universe, 4));
            for (Constraint c : kAllConstraints) {
                if (c == Constraint::FixedLengthEquality && !L) {
                    continue;  // undefined over variable-length sets
                }
                std::vector<idx_t> expect;
                for (idx_t i = 0; i < n; ++i) {
                    if (satisfies(labels[i], q, c)) {
                        expect.push_back(i);
                    }
                }
                if (!(filter_map(index, q, c, labels) == FilterBitmap::from_ids(expect, n))) {
                    return {false, "trial " + std::to_string(trial) + " constraint " + std::string(to_string(c))};
                }
                ++maps;
            }
        }
    }
    return {true, "200 datasets, " + std::to_string(maps) + " maps bit-exact"};
}

Outcome demo_bitmaps() {
    const Dataset d = testing::demo_dataset();
    const InvertedLabelIndex index(d.all_labels());
    auto bits = [](const FilterBitmap& b) {
        std::vector<int> out;
        for (idx_t i = 0; i < b.size(); ++i) {
            out.push_back(b.test(i) ? 1 : 0);
        }
        return out;
    };
    const LabelSet q{1, 2};
    const bool ok = bits(index.bitset(1)) == std::vector<int>{1, 1, 1, 0, 1, 0, 1} &&
                    bits(index.bitset(2)) == std::vector<int>{1, 1, 1, 0, 0, 1, 1} &&
                    bits(filter_map(index, q, Constraint::Containment, d.all_labels())) ==
                            std::vector<int>{1, 1, 1, 0, 0, 0, 1} &&
                    bits(filter_map(index, q, Constraint::Overlap, d.all_labels())) ==
                            std::vector<int>{1, 1, 1, 0, 1, 1, 1};
    const auto data = std::make_shared<const Dataset>(d);
    const auto bf = build_index(Algorithm::BruteForce, data, {});
    auto top = [&](Constraint c) { return bf->search(testing::demo_query(c), 0).neighbors.at(0).id; };
    const bool answers = top(Constraint::Containment) == 2 && top(Constraint::Equality) == 2 &&
                         top(Constraint::Overlap) == 4;
    return {ok && answers, std::string("B1, B2, AND, OR ") + (ok ? "match" : "differ") + "; demo answers " +
                                   (answers ? "v3, v3, v5" : "wrong")};
}

Outcome bruteforce_recall() {
    auto& g = graph_bench();
    const auto bf = build_index(Algorithm::BruteForce, g.split.base, {});
    RunOptions ro;
    ro.threads = threads();
    ro.warmup = 0;
    const std::uint32_t sweep[] = {0};
    std::size_t count = 0;
    double worst = 1.0;
    for (const auto& [key, w] : g.workloads) {
        worst = std::min(worst, run_workload(*bf, w, sweep, ro).at(0).recall);
        ++count;
    }
    // fixed-length workload too
    const std::size_t n = 5000, dim = 16;
    const auto s = split(n, dim, gen_clustered_vectors(n + 50, dim, 8, 201), gen_fixed_length_labels(n + 50, 2, 3, 202));
    const auto fw = make_workload(s, Constraint::FixedLengthEquality, s.query_labels, 10);
    const auto fbf = build_index(Algorithm::BruteForce, s.base, {});
    worst = std::min(worst, run_workload(*fbf, fw, sweep, ro).at(0).recall);
    ++count;
    return {worst == 1.0, std::to_string(count) + " workloads, min recall@10 " + fmt(worst)};
}

Outcome saturated_equality() {
    std::mt19937_64 rng(3);
    const auto data = std::make_shared<const Dataset>(testing::random_dataset(rng, 1000, 16, 8, 3));
    const auto hnsw = build_index(Algorithm::PostFilterHnsw, data, {});
    const auto ivf = build_index(Algorithm::PostFilterIvfPq, data, {{"full_rerank", 1}});
    const auto nlist = std::uint32_t(dynamic_cast<const PostFilterIvfPqIndex&>(*ivf).ivf().nlist());
    std::uniform_int_distribution<idx_t> pick(0, 999);
    std::normal_distribution<float> noise(0, 0.1f);
    std::size_t queries = 0, hnsw_ok = 0, ivf_ok = 0;
    for (Constraint c : kGeneral) {
        for (int i = 0; i < 100; ++i) {
            FilteredQuery q;
            for (float x : data->vector(pick(rng))) {
                q.embedding.push_back(x + noise(rng));
            }
            q.labels = data->labels(pick(rng));
            q.constraint = c;
            const auto expect = exact_filtered_knn(*data, hnsw->label_index(), q, kL2).neighbors;
            hnsw_ok += hnsw->search(q, 1000).neighbors == expect;
            ivf_ok += ivf->search(q, nlist).neighbors == expect;
            ++queries;
        }
    }
    return {hnsw_ok == queries && ivf_ok == queries,
            "HNSW l=n " + std::to_string(hnsw_ok) + "/" + std::to_string(queries) + ", IVF-PQ nprobe=nlist " +
                    std::to_string(ivf_ok) + "/" + std::to_string(queries) + " identical to the oracle"};
}

Outcome graph_recall() {
    auto& g = graph_bench();
    bool ok = true;
    std::ostringstream detail;
    for (Algorithm a : kGraphStrategies) {
        double worst_required = 1.0;
        double overlap = 1.0;
        for (int si = 0; si < 3; ++si) {
            for (Constraint c : kGeneral) {
                const auto& r = g.recall.at({a, si, c});
                const double best = *std::max_element(r.begin(), r.end());
                const bool required = c == Constraint::Containment || (a == Algorithm::Ung && c == Constraint::Equality);
                if (required) {
                    worst_required = std::min(worst_required, best);
                    ok = ok && best >= 0.90;
                } else if (c == Constraint::Overlap) {
                    overlap = std::min(overlap, best);
                }
            }
        }
        detail << to_string(a) << " " << fmt(worst_required, 2) << " (overlap " << fmt(overlap, 2) << "); ";
    }
    const double secs = g.seconds;
    ok = ok && secs < 600;
    detail << "build+sweep " << fmt(secs, 0) << " s";
    return {ok, "worst best-knob recall@10 over sigma: " + detail.str()};
}

Outcome fixed_length() {
    const std::size_t n = 10000, dim = 32, nq = 100;
    const auto s = split(n, dim, gen_clustered_vectors(n + nq, dim, 16, 301), gen_fixed_length_labels(n + nq, 4, 3, 302));
    const double p = 1.0 / 81;
    const double sd = std::sqrt(p * (1 - p) / double(n));
    const InvertedLabelIndex labels(s.base->all_labels());
    double worst_dev = 0;
    for (const auto& q : s.query_labels) {
        const double sel = double(filter_map(labels, q, Constraint::FixedLengthEquality, s.base->all_labels()).count()) /
                           double(n);
        worst_dev = std::max(worst_dev, std::abs(sel - p) / sd);
    }
    const auto w = make_workload(s, Constraint::FixedLengthEquality, s.query_labels, 10);
    BuildOptions bo;
    bo.threads = threads();
    bool ok = worst_dev <= 3.0;
    std::ostringstream detail;
    detail << "selectivity within " << fmt(worst_dev, 2) << " sd of 1/81; ";
    for (Algorithm a : kAllAlgorithms) {
        const auto index = build_index(a, s.base, {}, bo);
        auto sweep = index->default_sweep();
        if (index->knob_name() == "l") {
            sweep = kGraphSweep;
        }
        double best = 0;
        for (std::uint32_t knob : sweep) {
            best = std::max(best, workload_recall(*index, w, knob));
        }
        ok = ok && best >= 0.95;
        detail << to_string(a) << " " << fmt(best, 2) << " ";
    }
    return {ok, detail.str()};
}

Outcome audits() {
    auto& g = graph_bench();
    const Dataset& d = *g.split.base;
    auto pct = [](std::size_t good, std::size_t all) { return all ? 100.0 * double(good) / double(all) : 0.0; };

    const auto& ung = dynamic_cast<const UngIndex&>(*g.indexes.at(Algorithm::Ung));
    std::size_t ung_all = 0, ung_good = 0;
    for (idx_t u = 0; u < d.size(); ++u) {
        for (idx_t v : ung.adjacency()[u]) {
            ++ung_all;
            ung_good += d.labels(u).is_subset_of(d.labels(v));
        }
    }

    const auto& fv = dynamic_cast<const LabelVamanaIndex&>(*g.indexes.at(Algorithm::FilteredVamana));
    std::size_t fv_all = 0, fv_good = 0;
    for (idx_t u = 0; u < d.size(); ++u) {
        for (idx_t v : fv.adjacency()[u]) {
            ++fv_all;
            fv_good += d.labels(u).intersects(d.labels(v));
        }
    }

    const auto& sv = dynamic_cast<const LabelVamanaIndex&>(*g.indexes.at(Algorithm::StitchedVamana));
    std::size_t sv_all = 0, sv_good = 0;
    for (const auto& sub : sv.label_subgraphs()) {
        ++sv_all;
        sv_good += sub.members == sv.label_index().bitset(sub.label).positions();
        for (const auto& list : sub.adjacency) {
            for (idx_t v : list) {
                ++sv_all;
                sv_good += d.labels(v).contains(sub.label);
            }
        }
    }

    const auto ivf_index = build_index(Algorithm::PostFilterIvfPq, g.split.base, {});
    const auto& ivf = dynamic_cast<const PostFilterIvfPqIndex&>(*ivf_index).ivf();
    std::vector<int> seen(d.size(), 0);
    std::size_t ivf_good = 0;
    for (std::size_t l = 0; l < ivf.nlist(); ++l) {
        for (idx_t id : ivf.list(l)) {
            ++seen[id];
            ivf_good += ivf.coarse().assign(d.vector(id)) == l;
        }
    }
    const bool partition = std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
    const std::size_t ivf_all = d.size();

    const bool ok = ung_all && ung_good == ung_all && fv_all && fv_good == fv_all && sv_all && sv_good == sv_all &&
                    partition && ivf_good == ivf_all;
    return {ok, "UNG containment " + fmt(pct(ung_good, ung_all), 1) + "% of " + std::to_string(ung_all) +
                        " edges, Filtered-Vamana intersection " + fmt(pct(fv_good, fv_all), 1) + "% of " +
                        std::to_string(fv_all) + ", Stitched membership " + fmt(pct(sv_good, sv_all), 1) +
                        "%, IVF partition " + fmt(pct(partition ? ivf_good : 0, ivf_all), 1) + "%"};
}

Outcome tuner() {
    std::mt19937_64 rng(7);
    int exact = 0;
    for (int i = 0; i < 20; ++i) {
        const auto c = testing::piecewise_curve(rng);
        exact += interpolate_qps(c.curve, c.targets) == c.expect;
    }
    std::mt19937_64 rng2(9);
    int agree = 0;
    for (int i = 0; i < 100; ++i) {
        auto evals = testing::random_evaluations(rng2);
        const auto expect = testing::brute_select(evals);
        agree += rank_and_select(evals) == expect;
    }
    return {exact == 20 && agree == 100, "interpolation exact on " + std::to_string(exact) +
                                                 "/20 curves, selection agrees on " + std::to_string(agree) + "/100 tables"};
}

Outcome pareto() {
    std::mt19937_64 rng(11);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = testing::random_cloud(rng, trial);
        agree += pareto_frontier(pts) == testing::brute_frontier(pts);
    }
    return {agree == 100, std::to_string(agree) + "/100 clouds match the quadratic oracle"};
}

Outcome monotonicity() {
    auto& g = graph_bench();
    bool ok = true;
    std::size_t curves = 0;
    std::string where;
    for (const auto& [key, r] : g.recall) {
        ++curves;
        for (std::size_t i = 1; i < r.size(); ++i) {
            if (r[i] < r[i - 1]) {
                ok = false;
                where += std::string(to_string(std::get<0>(key))) + "/" + fmt(kSigmas[std::get<1>(key)], 2) + "/" +
                         std::string(to_string(std::get<2>(key))) + " l=" + std::to_string(kGraphSweep[i]) + " ";
            }
        }
    }

    const std::uint32_t l_max = 640;
    const auto hnsw = build_index(Algorithm::PostFilterHnsw, g.split.base, {{"l_max", l_max}});
    std::size_t searches = 0, within = 0;
    for (const auto& [key, w] : g.workloads) {
        for (const auto& q : w.queries) {
            for (std::uint32_t l0 : {10u, 20u, 40u, 80u}) {
                const auto out = hnsw->search(q, l0);
                ++searches;
                within += out.rounds <= std::uint32_t(std::ceil(std::log2(double(l_max) / l0))) + 1;
            }
        }
    }
    ok = ok && within == searches;
    return {ok, std::to_string(curves) + " recall curves non-decreasing in l" + (where.empty() ? "" : " except " + where) +
                        "; post-filter rounds within bound " + std::to_string(within) + "/" + std::to_string(searches)};
}

Outcome scaling() {
    const std::size_t sizes[] = {5000, 50000, 500000};
    const std::size_t dim = 32;
    const Algorithm algs[] = {Algorithm::PostFilterHnsw, Algorithm::PostFilterIvfPq, Algorithm::AcornOne};
    std::map<Algorithm, std::vector<double>> times;
    std::vector<BuildLogRow> log;
    for (std::size_t n : sizes) {
        const auto data = std::make_shared<const Dataset>(dim, gen_clustered_vectors(n, dim, 16, 401),
                                                          std::vector<LabelSet>(n));
        for (Algorithm a : algs) {
            BuildOptions bo;
            bo.threads = 1;
            const double t = thread_cpu_seconds();
            const auto index = build_index(a, data, {}, bo);
            const double secs = thread_cpu_seconds() - t;
            times[a].push_back(secs);
            log.push_back({std::string(to_string(a)), "n=" + std::to_string(n), format_params(index->params()), secs,
                           serialize_index(*index).size()});
        }
    }
    std::ofstream out("scaling_build_log.csv");
    write_build_log(out, log);
    bool ok = true;
    std::ostringstream detail;
    for (Algorithm a : algs) {
        const auto& t = times[a];
        detail << to_string(a) << " " << fmt(t[0], 2) << "/" << fmt(t[1], 2) << "/" << fmt(t[2], 1) << " s";
        for (std::size_t i = 1; i < t.size(); ++i) {
            const double ratio = t[i] / std::max(t[i - 1], 1e-3);
            ok = ok && ratio <= 30.0;
            detail << (i == 1 ? " ratios " : ",") << fmt(ratio, 1);
        }
        detail << "; ";
    }
    detail << "thread CPU time at 5k/50k/500k, written to scaling_build_log.csv";
    return {ok, detail.str()};
}

Outcome determinism() {
    const std::size_t n = 2000, dim = 16;
    const auto s = split(n, dim, gen_clustered_vectors(n + 50, dim, 8, 501), gen_fixed_length_labels(n + 50, 3, 3, 502));
    const auto w = make_workload(s, Constraint::FixedLengthEquality, s.query_labels, 10);
    RunOptions ro;
    ro.threads = threads();
    ro.warmup = 0;
    std::size_t same_bytes = 0, same_recall = 0;
    std::string differ;
    for (Algorithm a : kAllAlgorithms) {
        BuildOptions bo;
        bo.seed = 7;
        bo.threads = 1;
        const auto x = build_index(a, s.base, {}, bo);
        const auto y = build_index(a, s.base, {}, bo);
        const bool bytes = serialize_index(*x) == serialize_index(*y);
        auto sweep = x->default_sweep();
        std::vector<double> rx, ry;
        for (const auto& p : run_workload(*x, w, sweep, ro)) {
            rx.push_back(p.recall);
        }
        for (const auto& p : run_workload(*y, w, sweep, ro)) {
            ry.push_back(p.recall);
        }
        same_bytes += bytes;
        same_recall += rx == ry;
        if (!bytes || rx != ry) {
            differ += std::string(to_string(a)) + " ";
        }
    }
    const std::size_t total = std::size(kAllAlgorithms);
    return {same_bytes == total && same_recall == total,
            "identical index bytes " + std::to_string(same_bytes) + "/" + std::to_string(total) + ", recall columns " +
                    std::to_string(same_recall) + "/" + std::to_string(total) + (differ.empty() ? "" : "; differ: " + differ)};
}

}  // namespace

int main() {
    std::printf("threads %d\n", threads());
    criterion(1, "bitset semantics", [] {
        const auto t = Clock::now();
        auto o = bitset_semantics();
        o.pass = o.pass && seconds_since(t) < 30;
        return o;
    });
    criterion(2, "demo bitmaps", demo_bitmaps);
    criterion(3, "brute-force recall", bruteforce_recall);
    criterion(4, "saturated equality", [] {
        const auto t = Clock::now();
        auto o = saturated_equality();
        o.pass = o.pass && seconds_since(t) < 60;
        return o;
    });
    criterion(5, "graph strategy recall", graph_recall);
    criterion(6, "fixed-length recall", fixed_length);
    criterion(7, "structural audits", audits);
    criterion(8, "tuner", tuner);
    criterion(9, "pareto", pareto);
    criterion(10, "monotonicity", monotonicity);
    criterion(11, "build scaling", scaling);
    criterion(12, "determinism", determinism);
    std::printf("%d failed\n", failures);
    return failures ? 1 : 0;
}
