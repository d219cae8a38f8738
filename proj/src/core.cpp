#include "fanns/core.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fanns/distance.h"
#include "fanns/metrics.h"

namespace fanns {

LabelSet::LabelSet(std::initializer_list<label_t> labels)
        : LabelSet(from_unsorted(std::vector<label_t>(labels))) {}

LabelSet LabelSet::from_unsorted(std::vector<label_t> labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    LabelSet out;
    out.labels_ = std::move(labels);
    return out;
}

bool LabelSet::contains(label_t label) const {
    return std::binary_search(labels_.begin(), labels_.end(), label);
}

bool LabelSet::is_subset_of(const LabelSet& other) const {
    return std::includes(other.labels_.begin(), other.labels_.end(), labels_.begin(), labels_.end());
}

bool LabelSet::intersects(const LabelSet& other) const {
    auto a = labels_.begin();
    auto b = other.labels_.begin();
    while (a != labels_.end() && b != other.labels_.end()) {
        if (*a == *b) {
            return true;
        }
        if (*a < *b) {
            ++a;
        } else {
            ++b;
        }
    }
    return false;
}

std::string LabelSet::to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        os << (i ? "," : "") << labels_[i];
    }
    os << '}';
    return os.str();
}

std::string_view to_string(Constraint c) {
    switch (c) {
        case Constraint::Containment:
            return "containment";
        case Constraint::Overlap:
            return "overlap";
        case Constraint::Equality:
            return "equality";
        case Constraint::FixedLengthEquality:
            return "fixed-length-equality";
    }
    return "?";
}

Constraint parse_constraint(std::string_view name) {
    for (Constraint c : kAllConstraints) {
        if (to_string(c) == name) {
            return c;
        }
    }
    if (name == "fixed" || name == "fixed-equality") {
        return Constraint::FixedLengthEquality;
    }
    throw ParameterError("unknown constraint '" + std::string(name) + "'");
}

std::string_view to_string(Metric m) {
    return m == Metric::SquaredEuclidean ? "l2" : "ip";
}

Metric parse_metric(std::string_view name) {
    if (name == "l2" || name == "squared-euclidean") {
        return Metric::SquaredEuclidean;
    }
    if (name == "ip" || name == "inner-product") {
        return Metric::InnerProduct;
    }
    throw ParameterError("unknown metric '" + std::string(name) + "'");
}

Dataset::Dataset(std::size_t dim, std::vector<float> values, std::vector<LabelSet> labels)
        : dim_(dim), values_(std::move(values)), labels_(std::move(labels)) {
    if (values_.size() != dim_ * labels_.size()) {
        throw ParameterError("dataset holds " + std::to_string(values_.size()) + " values for " +
                             std::to_string(labels_.size()) + " records of dimension " +
                             std::to_string(dim_));
    }
    for (float v : values_) {
        if (!std::isfinite(v)) {
            throw ParameterError("dataset contains a non-finite value");
        }
    }
    if (!labels_.empty()) {
        fixed_length_ = labels_.front().size();
    }
    for (const LabelSet& set : labels_) {
        if (fixed_length_ && set.size() != *fixed_length_) {
            fixed_length_.reset();
        }
        if (!set.empty()) {
            universe_ = std::max<std::size_t>(universe_, std::size_t(set.labels().back()) + 1);
        }
    }
}

Dataset Dataset::subset(std::span<const idx_t> ids) const {
    std::vector<float> values;
    values.reserve(ids.size() * dim_);
    std::vector<LabelSet> labels;
    labels.reserve(ids.size());
    for (idx_t id : ids) {
        auto v = vector(id);
        values.insert(values.end(), v.begin(), v.end());
        labels.push_back(labels_[id]);
    }
    return Dataset(dim_, std::move(values), std::move(labels));
}

bool satisfies(const LabelSet& base, const LabelSet& query, Constraint constraint) {
    switch (constraint) {
        case Constraint::Containment:
            return query.is_subset_of(base);
        case Constraint::Overlap:
            return query.intersects(base);
        case Constraint::Equality:
            return base == query;
        case Constraint::FixedLengthEquality:
            if (base.size() != query.size()) {
                throw ConstraintError("fixed-length equality over label sets of lengths " +
                                      std::to_string(base.size()) + " and " +
                                      std::to_string(query.size()));
            }
            return base == query;
    }
    return false;
}

void check_constraint(const Dataset& dataset, const LabelSet& query, Constraint constraint) {
    if (constraint != Constraint::FixedLengthEquality || dataset.empty()) {
        return;
    }
    auto length = dataset.fixed_label_length();
    if (!length) {
        throw ConstraintError("fixed-length equality requires every record to carry the same number of labels");
    }
    if (query.size() != *length) {
        throw ConstraintError("query label set has length " + std::to_string(query.size()) +
                              ", dataset label length is " + std::to_string(*length));
    }
}

float distance(Metric metric, std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw ParameterError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    return distance_unchecked(metric, a.data(), b.data(), a.size());
}

double recall_at_k(std::span<const idx_t> result, const GroundTruth& truth, std::size_t k) {
    if (truth.ids.empty()) {
        throw ParameterError("recall against an empty ground truth");
    }
    if (k == 0) {
        throw ParameterError("recall requires k >= 1");
    }
    const std::size_t depth = std::min(k, truth.size());
    // Truth ids accepted as correct: the first `depth`, plus ties at the
    // boundary distance stored further down the list.
    std::vector<idx_t> accepted(truth.ids.begin(), truth.ids.begin() + depth);
    const float boundary = truth.distances[depth - 1];
    for (std::size_t j = depth; j < truth.size() && truth.distances[j] == boundary; ++j) {
        accepted.push_back(truth.ids[j]);
    }
    std::sort(accepted.begin(), accepted.end());

    std::vector<idx_t> returned(result.begin(), result.begin() + std::min(k, result.size()));
    std::sort(returned.begin(), returned.end());
    returned.erase(std::unique(returned.begin(), returned.end()), returned.end());

    std::size_t hits = 0;
    for (idx_t id : returned) {
        hits += std::binary_search(accepted.begin(), accepted.end(), id) ? 1 : 0;
    }
    return double(std::min(hits, depth)) / double(depth);
}

double selectivity(std::span<const LabelSet> base_labels, const LabelSet& query, Constraint constraint) {
    if (base_labels.empty()) {
        return 0.0;
    }
    std::size_t count = 0;
    for (const LabelSet& base : base_labels) {
        count += satisfies(base, query, constraint) ? 1 : 0;
    }
    return double(count) / double(base_labels.size());
}

}  // namespace fanns
