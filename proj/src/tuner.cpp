#include "fanns/tuner.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace fanns {

std::vector<ParamMap> ParamSpace::configs() const {
    std::vector<ParamMap> out{ParamMap{}};
    for (const auto& [key, grid] : build) {
        if (grid.empty()) {
            throw ParameterError("parameter grid for '" + key + "' is empty");
        }
        std::vector<ParamMap> next;
        next.reserve(out.size() * grid.size());
        for (const auto& partial : out) {
            for (double v : grid) {
                ParamMap p = partial;
                p[key] = v;
                next.push_back(std::move(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::size_t ParamSpace::size() const {
    std::size_t n = 1;
    for (const auto& [key, grid] : build) {
        n *= grid.size();
    }
    return n;
}

ParamSpace default_space(Algorithm algorithm) {
    ParamSpace s;
    switch (algorithm) {
        case Algorithm::BruteForce:
            break;
        case Algorithm::PostFilterHnsw:
            s.build = {{"M", {8, 16, 32}}, {"ef_construction", {100, 200}}};
            break;
        case Algorithm::PostFilterIvfPq:
            s.build = {{"nlist", {16, 64, 256}}, {"rerank", {4, 16}}};
            break;
        case Algorithm::AcornGamma:
            s.build = {{"M", {16, 32}}, {"gamma", {4, 8}}};
            break;
        case Algorithm::AcornOne:
            s.build = {{"M", {16, 32}}, {"ef_construction", {100, 200}}};
            break;
        case Algorithm::Ung:
            s.build = {{"R", {16, 32}}, {"cross", {3, 6}}};
            break;
        case Algorithm::FilteredVamana:
            s.build = {{"R", {32, 64}}, {"L", {64, 128}}};
            break;
        case Algorithm::StitchedVamana:
            s.build = {{"R_small", {16, 32}}, {"R_stitched", {32, 64}}};
            break;
        case Algorithm::Nhq:
            s.build = {{"K", {16, 32}}, {"diversify", {0, 8}}};
            break;
        case Algorithm::Caps:
            s.build = {{"clusters", {16, 64}}, {"h", {4, 8}}};
            break;
    }
    return s;
}

std::vector<Subspace> partition_space(const ParamSpace& space, std::size_t n_sub, std::vector<std::string>* warnings) {
    const auto configs = space.configs();
    const std::size_t c = configs.size();
    if (n_sub == 0) {
        n_sub = std::min<std::size_t>(c, 8);
    }
    if (n_sub > c) {
        if (warnings) {
            warnings->push_back("n_sub " + std::to_string(n_sub) + " exceeds the " + std::to_string(c) +
                                " build configurations; clamped");
        }
        n_sub = c;
    }
    std::vector<Subspace> out(n_sub);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_sub; ++i) {
        const std::size_t len = c / n_sub + (i < c % n_sub ? 1 : 0);
        out[i].index = i;
        out[i].configs.assign(configs.begin() + std::ptrdiff_t(next), configs.begin() + std::ptrdiff_t(next + len));
        next += len;
    }
    return out;
}

Curve average_curves(const std::vector<Curve>& curves) {
    if (curves.empty()) {
        throw ParameterError("no curves to average");
    }
    Curve out(curves.front().size());
    for (const auto& curve : curves) {
        if (curve.size() != out.size()) {
            throw ParameterError("curves to average differ in length");
        }
        for (std::size_t i = 0; i < curve.size(); ++i) {
            out[i].recall += curve[i].recall;
            out[i].qps += curve[i].qps;
        }
    }
    for (auto& p : out) {
        p.recall /= double(curves.size());
        p.qps /= double(curves.size());
    }
    std::stable_sort(out.begin(), out.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.recall < b.recall; });
    return out;
}

std::vector<double> interpolate_qps(const Curve& curve, std::span<const double> targets) {
    if (curve.empty()) {
        throw ParameterError("cannot interpolate an empty curve");
    }
    Curve pts = curve;
    std::sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) {
        return a.recall < b.recall || (a.recall == b.recall && a.qps > b.qps);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const CurvePoint& a, const CurvePoint& b) { return a.recall == b.recall; }),
              pts.end());
    std::vector<double> out;
    for (double t : targets) {
        if (t > pts.back().recall) {
            out.push_back(0.0);
        } else if (t <= pts.front().recall) {
            out.push_back(pts.front().qps);
        } else {
            // first point at or above t; its predecessor lies below
            const auto hi = std::size_t(std::lower_bound(pts.begin(), pts.end(), t,
                                                         [](const CurvePoint& p, double v) { return p.recall < v; }) -
                                        pts.begin());
            const auto& b = pts[hi];
            const auto& a = pts[hi - 1];
            out.push_back(b.recall == t ? b.qps : a.qps + (t - a.recall) * (b.qps - a.qps) / (b.recall - a.recall));
        }
    }
    return out;
}

std::optional<std::size_t> rank_and_select(std::vector<ConfigEvaluation>& evaluations) {
    std::optional<std::size_t> best;
    if (evaluations.empty()) {
        return best;
    }
    std::size_t targets = 0;
    for (const auto& e : evaluations) {
        if (e.valid) {
            targets = std::max(targets, e.qps_at_targets.size());
        }
    }
    for (auto& e : evaluations) {
        if (e.valid && e.qps_at_targets.size() != targets) {
            throw ParameterError("evaluations disagree on the number of recall targets");
        }
        e.ranks.assign(targets, 0);
        e.rank_sum = 0;
    }
    for (std::size_t t = 0; t < targets; ++t) {
        for (auto& e : evaluations) {
            std::size_t rank = 1;
            for (const auto& o : evaluations) {
                if (o.valid && (!e.valid || o.qps_at_targets[t] > e.qps_at_targets[t])) {
                    ++rank;
                }
            }
            e.ranks[t] = rank;
            e.rank_sum += rank;
        }
    }
    for (std::size_t i = 0; i < evaluations.size(); ++i) {
        const auto& e = evaluations[i];
        if (!e.valid) {
            continue;
        }
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = evaluations[*best];
        const double eq = targets ? e.qps_at_targets.back() : 0.0;
        const double bq = targets ? b.qps_at_targets.back() : 0.0;
        if (e.rank_sum < b.rank_sum ||
            (e.rank_sum == b.rank_sum &&
             (eq > bq || (eq == bq && format_params(e.params) < format_params(b.params))))) {
            best = i;
        }
    }
    return best;
}

ConfigEvaluation evaluate_config(Algorithm algorithm, const ParamMap& params, std::shared_ptr<const Dataset> sample,
                                 const std::vector<Workload>& workloads, std::span<const std::uint32_t> sweep,
                                 const TuneOptions& options) {
    ConfigEvaluation e;
    e.params = params;
    try {
        BuildOptions bo;
        bo.metric = options.metric;
        bo.seed = options.seed;
        bo.threads = options.threads;
        const auto index = build_index(algorithm, std::move(sample), params, bo);
        const auto knobs = sweep.empty() ? index->default_sweep() : std::vector<std::uint32_t>(sweep.begin(), sweep.end());
        RunOptions ro;
        ro.k = options.k;
        ro.threads = options.threads;
        ro.warmup = options.warmup;
        std::vector<Curve> curves;
        for (const auto& w : workloads) {
            Curve c;
            for (const auto& p : run_workload(*index, w, knobs, ro)) {
                c.push_back({p.recall, p.qps});
            }
            e.scenario_curves.emplace_back(std::string(to_string(w.scenario)), c);
            curves.push_back(std::move(c));
        }
        e.averaged = average_curves(curves);
        e.qps_at_targets = interpolate_qps(e.averaged, options.targets);
    } catch (const Error& err) {
        e.valid = false;
        e.error = err.what();
        e.qps_at_targets.clear();
    }
    return e;
}

std::string TuningReport::to_json() const {
    using nlohmann::json;
    auto curve_json = [](const Curve& c) {
        json a = json::array();
        for (const auto& p : c) {
            a.push_back({{"recall", p.recall}, {"qps", p.qps}});
        }
        return a;
    };
    json j;
    j["algorithm"] = algorithm;
    j["targets"] = targets;
    j["sample_size"] = sample_size;
    j["warnings"] = warnings;
    j["subspaces"] = json::array();
    for (const auto& s : subspaces) {
        json sj;
        sj["index"] = s.subspace.index;
        sj["selected"] = s.selected ? json(format_params(s.evaluations[*s.selected].params)) : json(nullptr);
        sj["evaluations"] = json::array();
        for (const auto& e : s.evaluations) {
            json ej;
            ej["params"] = format_params(e.params);
            ej["valid"] = e.valid;
            if (!e.valid) {
                ej["error"] = e.error;
            }
            ej["qps_at_targets"] = e.qps_at_targets;
            ej["ranks"] = e.ranks;
            ej["rank_sum"] = e.rank_sum;
            ej["averaged"] = curve_json(e.averaged);
            json per = json::object();
            for (const auto& [scenario, curve] : e.scenario_curves) {
                per[scenario] = curve_json(curve);
            }
            ej["scenarios"] = per;
            sj["evaluations"].push_back(ej);
        }
        j["subspaces"].push_back(sj);
    }
    return j.dump(2);
}

std::vector<idx_t> sample_ids(std::size_t n, double fraction, std::size_t floor, std::uint64_t seed) {
    if (fraction <= 0 || fraction > 1) {
        throw ParameterError("sample fraction must lie in (0, 1]");
    }
    const std::size_t want = std::min(n, std::max(floor, std::size_t(std::ceil(fraction * double(n)))));
    std::vector<idx_t> ids(n);
    std::iota(ids.begin(), ids.end(), idx_t{0});
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(want);
    std::sort(ids.begin(), ids.end());
    return ids;
}

Workload resample_workload(const Workload& workload, const Dataset& sample, std::uint32_t k, Metric metric,
                           int threads) {
    Workload w = workload;
    w.k_max = k;
    w.guarantee = false;
    w.truth.clear();
    w.satisfied.clear();
    attach_ground_truth(w, sample, metric, threads);
    return w;
}

TuningReport tune(Algorithm algorithm, const ParamSpace& space, std::shared_ptr<const Dataset> sample,
                  const std::vector<Workload>& workloads, const TuneOptions& options) {
    TuningReport report;
    report.algorithm = std::string(to_string(algorithm));
    report.targets = options.targets;
    report.sample_size = sample->size();
    std::vector<Workload> usable;
    for (const auto& w : workloads) {
        const bool fixed_only = algorithm == Algorithm::Nhq || algorithm == Algorithm::Caps;
        if (!fixed_only || w.scenario == Constraint::FixedLengthEquality) {
            usable.push_back(w);
        } else {
            report.warnings.push_back(report.algorithm + " skips the " + std::string(to_string(w.scenario)) +
                                      " workload");
        }
    }
    if (usable.empty()) {
        throw ParameterError(report.algorithm + " supports none of the given workloads");
    }
    for (auto& sub : partition_space(space, options.n_sub, &report.warnings)) {
        SubspaceResult r;
        for (const auto& params : sub.configs) {
            r.evaluations.push_back(evaluate_config(algorithm, params, sample, usable, space.sweep, options));
        }
        r.selected = rank_and_select(r.evaluations);
        if (!r.selected) {
            report.warnings.push_back("subspace " + std::to_string(sub.index) + " has no valid configuration");
        }
        r.subspace = std::move(sub);
        report.subspaces.push_back(std::move(r));
    }
    return report;
}

}  // namespace fanns
