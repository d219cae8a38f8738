// Command-line harness: build, gt, gen, search, tune, pareto.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "fanns/harness.h"
#include "fanns/serialize.h"
#include "fanns/strategy.h"
#include "fanns/tuner.h"
#include "fanns/workload.h"

using namespace fanns;

namespace {

struct Globals {
    int threads = 16;
    std::uint64_t seed = 42;
    std::string metric = "l2";
    bool exclude_filter_time = false;
};

std::vector<std::uint32_t> parse_sweep(const std::string& text) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(std::uint32_t(std::stoul(item)));
        }
    }
    return out;
}

/// "M=8,16;ef_construction=100,200"
ParamSpace parse_space(const std::string& text) {
    ParamSpace s;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ';')) {
        const auto eq = axis.find('=');
        if (eq == std::string::npos) {
            throw ParameterError("parameter grid '" + axis + "' lacks '='");
        }
        auto& grid = s.build[axis.substr(0, eq)];
        for (auto v : parse_sweep(axis.substr(eq + 1))) {
            grid.push_back(v);
        }
    }
    return s;
}

void write_csv_file(const std::string& path, const std::vector<RunPoint>& points, bool append) {
    if (path.empty() || path == "-") {
        write_run_csv(std::cout, points);
        return;
    }
    const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path);
    }
    write_run_csv(out, points, header);
}

std::shared_ptr<const Dataset> load_base(const std::string& fvecs, const std::string& labels,
                                         LabelMapping* mapping = nullptr) {
    return std::make_shared<const Dataset>(load_dataset_files(fvecs, labels, mapping));
}

void save_base(const std::filesystem::path& dir, const Dataset& data, const LabelMapping& mapping) {
    Matrix m;
    m.dim = data.dim();
    m.values.assign(data.values().begin(), data.values().end());
    save_fvecs(dir / "base.fvecs", m);
    save_labels(dir / "base.labels", std::vector<LabelSet>(data.all_labels().begin(), data.all_labels().end()),
                mapping);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Filtered approximate nearest neighbor search toolkit"};
    app.require_subcommand(1);
    Globals g;
    if (const char* env = std::getenv("FANNS_THREADS")) {
        g.threads = std::atoi(env);
    }
    app.add_option("--threads", g.threads, "Search worker threads (FANNS_THREADS overrides the default)")
            ->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--metric", g.metric, "Distance metric")->check(CLI::IsMember({"l2", "ip"}));
    app.add_flag("--exclude-filter-time", g.exclude_filter_time, "Build filter bitmaps outside the timed region");

    // build
    auto* build = app.add_subcommand("build", "Build an index file");
    std::string b_data, b_labels, b_algo, b_params, b_out, b_log, b_param_id;
    int b_threads = 1;
    build->add_option("--data", b_data, "Base vectors (fvecs)")->required()->check(CLI::ExistingFile);
    build->add_option("--labels", b_labels, "Base labels")->required()->check(CLI::ExistingFile);
    build->add_option("--algorithm", b_algo, "Strategy name")->required();
    build->add_option("--params", b_params, "Build parameters, e.g. M=16;ef_construction=100");
    build->add_option("--out", b_out, "Index file")->required();
    build->add_option("--build-threads", b_threads, "Build threads (1 keeps builds deterministic)");
    build->add_option("--build-log", b_log, "Append a row to this build-log CSV");
    build->add_option("--param-id", b_param_id, "Config id for the build log");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a workload (and a synthetic dataset)");
    std::string gn_fixed, gn_data, gn_labels, gn_queries, gn_out, gn_scenario = "containment", gn_strat = "none",
                                                                  gn_name;
    std::size_t gn_n = 10000, gn_dim = 32, gn_nq = 100, gn_kmax = 100, gn_clusters = 16;
    double gn_sigma = 0;
    bool gn_no_guarantee = false;
    gen->add_option("--synthetic-fixed", gn_fixed, "Synthetic fixed-length labels, LENGTHxVALUES (e.g. 4x3)");
    gen->add_option("--data", gn_data, "Base vectors (fvecs)")->check(CLI::ExistingFile);
    gen->add_option("--labels", gn_labels, "Base labels")->check(CLI::ExistingFile);
    gen->add_option("--query-vectors", gn_queries, "Query vectors (fvecs)")->check(CLI::ExistingFile);
    gen->add_option("--n", gn_n, "Synthetic base size");
    gen->add_option("--dim", gn_dim, "Synthetic dimension");
    gen->add_option("--clusters", gn_clusters, "Synthetic Gaussian clusters");
    gen->add_option("--queries", gn_nq, "Number of queries (per group when stratified)");
    gen->add_option("--k-max", gn_kmax, "Ground-truth depth");
    gen->add_option("--scenario", gn_scenario, "containment|overlap|equality|fixed-length-equality");
    gen->add_option("--stratify", gn_strat, "none|length|selectivity")
            ->check(CLI::IsMember({"none", "length", "selectivity"}));
    gen->add_option("--selectivity", gn_sigma, "Target selectivity for query labels");
    gen->add_option("--name", gn_name, "Dataset id recorded in the manifest");
    gen->add_flag("--no-guarantee", gn_no_guarantee, "Keep queries with fewer than k-max matches");
    gen->add_option("--out", gn_out, "Output directory")->required();

    // gt
    auto* gt = app.add_subcommand("gt", "Recompute a workload's ground truth");
    std::string gt_data, gt_labels, gt_workload;
    std::size_t gt_kmax = 0;
    gt->add_option("--data", gt_data, "Base vectors (fvecs)")->required()->check(CLI::ExistingFile);
    gt->add_option("--labels", gt_labels, "Base labels")->required()->check(CLI::ExistingFile);
    gt->add_option("--workload", gt_workload, "Workload directory")->required()->check(CLI::ExistingPath);
    gt->add_option("--k-max", gt_kmax, "New ground-truth depth (default: keep)");

    // search
    auto* search = app.add_subcommand("search", "Run a workload against an index");
    std::string s_index, s_workload, s_sweep, s_csv, s_dataset, s_param_id;
    std::uint32_t s_k = 10;
    bool s_append = false;
    search->add_option("--index", s_index, "Index file")->required()->check(CLI::ExistingFile);
    search->add_option("--workload", s_workload, "Workload directory")->required()->check(CLI::ExistingPath);
    search->add_option("--sweep", s_sweep, "Comma-separated knob values (default: the index's sweep)");
    search->add_option("--k", s_k, "Result depth");
    search->add_option("--csv", s_csv, "Output CSV (default stdout)");
    search->add_flag("--append", s_append, "Append to the CSV");
    search->add_option("--dataset", s_dataset, "Dataset id for the CSV");
    search->add_option("--param-id", s_param_id, "Config id for the CSV");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Grid-tune an algorithm on a sampled dataset");
    std::string t_data, t_labels, t_algo, t_space, t_sweep, t_out;
    std::vector<std::string> t_workloads;
    double t_fraction = 0.1;
    std::size_t t_floor = 5000, t_nsub = 0;
    std::uint32_t t_k = 10;
    tune_cmd->add_option("--data", t_data, "Base vectors (fvecs)")->required()->check(CLI::ExistingFile);
    tune_cmd->add_option("--labels", t_labels, "Base labels")->required()->check(CLI::ExistingFile);
    tune_cmd->add_option("--algorithm", t_algo, "Strategy name")->required();
    tune_cmd->add_option("--workload", t_workloads, "Workload directories, one per scenario")
            ->required()
            ->check(CLI::ExistingPath);
    tune_cmd->add_option("--space", t_space, "Build grid, e.g. M=8,16;ef_construction=100,200");
    tune_cmd->add_option("--sweep", t_sweep, "Comma-separated knob values");
    tune_cmd->add_option("--sample-fraction", t_fraction, "Sampled share of the dataset");
    tune_cmd->add_option("--sample-floor", t_floor, "Minimum sample size");
    tune_cmd->add_option("--subspaces", t_nsub, "Number of subspaces (0 = automatic)");
    tune_cmd->add_option("--k", t_k, "Result depth");
    tune_cmd->add_option("--out", t_out, "Report path (default stdout)");

    // pareto
    auto* pareto = app.add_subcommand("pareto", "Pareto frontier of run CSVs");
    std::vector<std::string> p_in;
    std::string p_out;
    bool p_global = false;
    pareto->add_option("--in", p_in, "Run CSV files")->required()->check(CLI::ExistingFile);
    pareto->add_option("--out", p_out, "Frontier CSV (default stdout)");
    pareto->add_flag("--global", p_global, "One frontier over all rows instead of per dataset and scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Metric metric = parse_metric(g.metric);
        if (*build) {
            const Algorithm a = parse_algorithm(b_algo);
            const auto data = load_base(b_data, b_labels);
            BuildOptions opt;
            opt.metric = metric;
            opt.seed = g.seed;
            opt.threads = b_threads;
            const auto start = std::chrono::steady_clock::now();
            const auto index = build_index(a, data, parse_params(b_params), opt);
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            const auto bytes = serialize_index(*index);
            write_file_bytes(b_out, bytes);
            if (!b_log.empty()) {
                const bool header = !std::filesystem::exists(b_log) || std::filesystem::file_size(b_log) == 0;
                std::ofstream log(b_log, std::ios::app);
                write_build_log(log, {{std::string(to_string(a)), b_param_id, format_params(index->params()), seconds,
                                       bytes.size()}},
                                header);
            }
            std::cerr << to_string(a) << ": built " << data->size() << " records in " << seconds << " s, "
                      << bytes.size() << " bytes\n";
        } else if (*gen) {
            const Constraint scenario =
                    gn_fixed.empty() ? parse_constraint(gn_scenario) : Constraint::FixedLengthEquality;
            std::shared_ptr<const Dataset> base;
            LabelMapping mapping;
            Matrix qvecs;
            std::vector<LabelSet> qlabels;
            std::vector<std::string> strata;
            std::vector<std::string> warnings;
            std::string stratification = gn_strat;
            const std::filesystem::path out = gn_out;
            std::filesystem::create_directories(out);
            if (!gn_fixed.empty()) {
                const auto x = gn_fixed.find('x');
                if (x == std::string::npos) {
                    throw ParameterError("--synthetic-fixed expects LENGTHxVALUES, got '" + gn_fixed + "'");
                }
                const std::size_t L = std::stoul(gn_fixed.substr(0, x));
                const std::size_t V = std::stoul(gn_fixed.substr(x + 1));
                const std::size_t total = gn_n + gn_nq;
                const Dataset all(gn_dim, gen_clustered_vectors(total, gn_dim, gn_clusters, g.seed),
                                  gen_fixed_length_labels(total, L, V, g.seed + 1));
                HeldOut h = hold_out(all, gn_nq, g.seed + 2);
                mapping = LabelMapping::identity(L * V);
                base = std::make_shared<const Dataset>(std::move(h.base));
                qvecs = std::move(h.queries);
                qlabels = std::move(h.query_labels);
                save_base(out, *base, mapping);
                stratification = "fixed-length " + gn_fixed;
            } else {
                if (gn_data.empty() || gn_labels.empty() || gn_queries.empty()) {
                    throw CLI::RequiredError("gen needs --synthetic-fixed or --data, --labels and --query-vectors");
                }
                base = load_base(gn_data, gn_labels, &mapping);
                qvecs = load_fvecs(gn_queries);
                QuerySeeds seeds;
                const auto labels = base->all_labels();
                if (gn_strat == "length") {
                    seeds = stratify_by_length(labels, scenario, gn_nq, g.seed);
                } else if (gn_strat == "selectivity") {
                    const double pct[] = {1, 25, 50, 75};
                    seeds = stratify_by_selectivity(labels, scenario, pct, gn_nq, g.seed);
                } else if (gn_sigma > 0) {
                    seeds = queries_near_selectivity(labels, scenario, gn_sigma, gn_nq, g.seed);
                    stratification = "selectivity " + std::to_string(gn_sigma);
                } else {
                    std::mt19937_64 rng(g.seed);
                    std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
                    for (std::size_t i = 0; i < gn_nq; ++i) {
                        seeds.labels.push_back(labels[pick(rng)]);
                        seeds.strata.push_back("all");
                    }
                }
                if (qvecs.rows() == 0 || qvecs.dim != base->dim()) {
                    throw ParameterError("query vectors do not match the base dimension");
                }
                qlabels = std::move(seeds.labels);
                strata = std::move(seeds.strata);
                warnings = std::move(seeds.warnings);
                // reuse query vectors cyclically when there are more label sets
                Matrix cycled{qvecs.dim, {}};
                for (std::size_t i = 0; i < qlabels.size(); ++i) {
                    const auto row = qvecs.row(i % qvecs.rows());
                    cycled.values.insert(cycled.values.end(), row.begin(), row.end());
                }
                qvecs = std::move(cycled);
            }
            for (const auto& w : warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            Workload w;
            w.dataset = gn_name.empty() ? (gn_fixed.empty() ? std::filesystem::path(gn_data).stem().string()
                                                            : "synthetic-fixed-" + gn_fixed)
                                        : gn_name;
            w.scenario = scenario;
            w.k_max = std::uint32_t(gn_kmax);
            w.guarantee = !gn_no_guarantee;
            w.stratification = stratification;
            for (std::size_t i = 0; i < qlabels.size(); ++i) {
                FilteredQuery q;
                q.embedding.assign(qvecs.row(i).begin(), qvecs.row(i).end());
                q.labels = qlabels[i];
                q.constraint = scenario;
                w.queries.push_back(std::move(q));
                w.strata.push_back(i < strata.size() ? strata[i] : "all");
            }
            attach_ground_truth(w, *base, metric, g.threads);
            save_workload(out / "workload", w, mapping);
            std::cerr << "wrote " << w.size() << " queries to " << (out / "workload").string() << '\n';
        } else if (*gt) {
            LabelMapping mapping;
            const auto data = load_base(gt_data, gt_labels, &mapping);
            Workload w = load_workload(gt_workload);
            if (gt_kmax > 0) {
                w.k_max = std::uint32_t(gt_kmax);
            }
            w.truth.clear();
            w.satisfied.clear();
            attach_ground_truth(w, *data, metric, g.threads);
            const auto dir = std::filesystem::is_directory(gt_workload) ? std::filesystem::path(gt_workload)
                                                                        : std::filesystem::path(gt_workload).parent_path();
            save_workload(dir, w, mapping);
            std::cerr << "ground truth for " << w.size() << " queries at depth " << w.k_max << '\n';
        } else if (*search) {
            const auto index = deserialize_index(read_file_bytes(s_index));
            const Workload w = load_workload(s_workload);
            const auto sweep = s_sweep.empty() ? index->default_sweep() : parse_sweep(s_sweep);
            RunOptions opt;
            opt.k = s_k;
            opt.threads = g.threads;
            opt.exclude_filter_time = g.exclude_filter_time;
            opt.dataset = s_dataset;
            opt.param_id = s_param_id;
            write_csv_file(s_csv, run_workload(*index, w, sweep, opt), s_append);
        } else if (*tune_cmd) {
            const Algorithm a = parse_algorithm(t_algo);
            const auto full = load_base(t_data, t_labels);
            const auto sample =
                    std::make_shared<const Dataset>(full->subset(sample_ids(full->size(), t_fraction, t_floor, g.seed)));
            TuneOptions opt;
            opt.n_sub = t_nsub;
            opt.k = t_k;
            opt.threads = g.threads;
            opt.seed = g.seed;
            opt.metric = metric;
            std::vector<Workload> workloads;
            for (const auto& path : t_workloads) {
                workloads.push_back(resample_workload(load_workload(path), *sample, t_k, metric, g.threads));
            }
            ParamSpace space = t_space.empty() ? default_space(a) : parse_space(t_space);
            space.sweep = parse_sweep(t_sweep);
            const auto report = tune(a, space, sample, workloads, opt);
            for (const auto& w : report.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            if (t_out.empty() || t_out == "-") {
                std::cout << report.to_json() << '\n';
            } else {
                std::ofstream(t_out) << report.to_json() << '\n';
            }
        } else if (*pareto) {
            std::vector<RunPoint> all;
            for (const auto& path : p_in) {
                std::ifstream in(path);
                auto pts = read_run_csv(in);
                all.insert(all.end(), pts.begin(), pts.end());
            }
            std::vector<RunPoint> frontier;
            if (p_global) {
                frontier = pareto_frontier(all);
            } else {
                std::vector<std::pair<std::string, std::string>> order;
                std::map<std::pair<std::string, std::string>, std::vector<RunPoint>> groups;
                for (const auto& p : all) {
                    auto key = std::make_pair(p.dataset, p.scenario);
                    if (!groups.count(key)) {
                        order.push_back(key);
                    }
                    groups[key].push_back(p);
                }
                for (const auto& key : order) {
                    const auto f = pareto_frontier(groups[key]);
                    frontier.insert(frontier.end(), f.begin(), f.end());
                }
            }
            write_csv_file(p_out, frontier, false);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
