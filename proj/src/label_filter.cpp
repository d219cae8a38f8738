#include "fanns/label_filter.h"

#include <algorithm>

namespace fanns {

namespace {

std::size_t word_count(std::size_t n) {
    return (n + FilterBitmap::kWordBits - 1) / FilterBitmap::kWordBits;
}

}  // namespace

FilterBitmap FilterBitmap::zeros(std::size_t n) {
    return from_words(std::vector<word_t>(word_count(n), 0), n);
}

FilterBitmap FilterBitmap::ones(std::size_t n) {
    return from_words(std::vector<word_t>(word_count(n), ~word_t{0}), n);
}

FilterBitmap FilterBitmap::from_words(std::vector<word_t> words, std::size_t n) {
    if (words.size() != word_count(n)) {
        throw ParameterError("bitmap of " + std::to_string(n) + " bits needs " +
                             std::to_string(word_count(n)) + " words");
    }
    if (const std::size_t tail = n % kWordBits; tail != 0) {
        words.back() &= (word_t{1} << tail) - 1;
    }
    FilterBitmap out;
    out.n_ = n;
    for (word_t w : words) {
        out.count_ += std::size_t(std::popcount(w));
    }
    out.words_ = std::move(words);
    return out;
}

FilterBitmap FilterBitmap::from_bools(std::span<const bool> bits) {
    std::vector<word_t> words(word_count(bits.size()), 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            words[i / kWordBits] |= word_t{1} << (i % kWordBits);
        }
    }
    return from_words(std::move(words), bits.size());
}

FilterBitmap FilterBitmap::from_ids(std::span<const idx_t> ids, std::size_t n) {
    std::vector<word_t> words(word_count(n), 0);
    for (idx_t i : ids) {
        if (i >= n) {
            throw ParameterError("bitmap id " + std::to_string(i) + " out of range");
        }
        words[i / kWordBits] |= word_t{1} << (i % kWordBits);
    }
    return from_words(std::move(words), n);
}

std::vector<idx_t> FilterBitmap::positions() const {
    std::vector<idx_t> out;
    out.reserve(count_);
    for (idx_t i : *this) {
        out.push_back(i);
    }
    return out;
}

InvertedLabelIndex::InvertedLabelIndex(std::span<const LabelSet> labels) : n_(labels.size()) {
    label_t universe = 0;
    for (const LabelSet& set : labels) {
        if (!set.empty()) {
            universe = std::max(universe, set.labels().back() + 1);
        }
    }
    const std::size_t words = word_count(n_);
    std::vector<std::vector<FilterBitmap::word_t>> raw(universe, std::vector<FilterBitmap::word_t>(words, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (label_t l : labels[i]) {
            raw[l][i / FilterBitmap::kWordBits] |= FilterBitmap::word_t{1} << (i % FilterBitmap::kWordBits);
        }
    }
    bitsets_.reserve(universe);
    for (auto& w : raw) {
        bitsets_.push_back(FilterBitmap::from_words(std::move(w), n_));
    }
    empty_ = FilterBitmap::zeros(n_);
}

std::size_t InvertedLabelIndex::storage_words() const {
    std::size_t total = 0;
    for (const auto& b : bitsets_) {
        total += b.words().size();
    }
    return total;
}

InvertedLabelIndex build_inverted_index(const Dataset& dataset) {
    return InvertedLabelIndex(dataset.all_labels());
}

FilterBitmap filter_map(const InvertedLabelIndex& index,
                        const LabelSet& query,
                        Constraint constraint,
                        std::span<const LabelSet> labels,
                        FilterStats* stats) {
    const std::size_t n = index.size();
    if (labels.size() != n) {
        throw ParameterError("label sets do not match the inverted index size");
    }
    const std::size_t words = word_count(n);
    const bool is_or = constraint == Constraint::Overlap;

    if (query.empty()) {
        if (is_or) {
            return FilterBitmap::zeros(n);
        }
        if (constraint == Constraint::Containment) {
            return FilterBitmap::ones(n);
        }
    }

    std::vector<FilterBitmap::word_t> acc;
    if (query.empty()) {
        acc.assign(words, ~FilterBitmap::word_t{0});
    } else {
        auto first = index.bitset(query.labels()[0]).words();
        acc.assign(first.begin(), first.end());
        for (std::size_t q = 1; q < query.size(); ++q) {
            auto other = index.bitset(query.labels()[q]).words();
            if (is_or) {
                for (std::size_t w = 0; w < words; ++w) {
                    acc[w] |= other[w];
                }
            } else {
                for (std::size_t w = 0; w < words; ++w) {
                    acc[w] &= other[w];
                }
            }
            if (stats) {
                ++stats->combine_passes;
                stats->words_touched += words;
            }
        }
    }

    if (constraint == Constraint::Equality || constraint == Constraint::FixedLengthEquality) {
        // AND survivors contain the query; keep only exact matches.
        for (std::size_t w = 0; w < words; ++w) {
            FilterBitmap::word_t bits = acc[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                bits &= bits - 1;
                const std::size_t i = w * FilterBitmap::kWordBits + std::size_t(b);
                if (i >= n) {
                    break;
                }
                const LabelSet& base = labels[i];
                bool keep = base.size() == query.size();
                if (constraint == Constraint::FixedLengthEquality || keep) {
                    keep = satisfies(base, query, constraint);
                }
                if (stats) {
                    ++stats->verified;
                }
                if (!keep) {
                    acc[w] &= ~(FilterBitmap::word_t{1} << b);
                }
            }
        }
    }
    return FilterBitmap::from_words(std::move(acc), n);
}

FilterBitmap filter_map_scan(std::span<const LabelSet> labels, const LabelSet& query, Constraint constraint) {
    std::vector<FilterBitmap::word_t> words(word_count(labels.size()), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (satisfies(labels[i], query, constraint)) {
            words[i / FilterBitmap::kWordBits] |= FilterBitmap::word_t{1} << (i % FilterBitmap::kWordBits);
        }
    }
    return FilterBitmap::from_words(std::move(words), labels.size());
}

}  // namespace fanns
