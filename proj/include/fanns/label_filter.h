#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "fanns/core.h"

namespace fanns {

/// Immutable word-packed membership mask over record ids [0, n).
/// Bits past n are always zero and the population count is cached.
class FilterBitmap {
public:
    using word_t = std::uint64_t;
    static constexpr std::size_t kWordBits = 64;

    FilterBitmap() = default;
    static FilterBitmap zeros(std::size_t n);
    static FilterBitmap ones(std::size_t n);
    /// Takes ownership of `words`; tail bits past n are cleared.
    static FilterBitmap from_words(std::vector<word_t> words, std::size_t n);
    static FilterBitmap from_bools(std::span<const bool> bits);
    static FilterBitmap from_ids(std::span<const idx_t> ids, std::size_t n);

    std::size_t size() const { return n_; }
    std::size_t count() const { return count_; }
    bool test(idx_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
    std::span<const word_t> words() const { return words_; }

    /// Ascending set-bit positions.
    class Iterator {
    public:
        using value_type = idx_t;
        using difference_type = std::ptrdiff_t;

        Iterator() = default;
        Iterator(const FilterBitmap* owner, std::size_t word) : owner_(owner), word_(word) { advance(); }
        idx_t operator*() const { return idx_t(word_ * kWordBits + std::countr_zero(current_)); }
        Iterator& operator++() {
            current_ &= current_ - 1;
            if (current_ == 0) {
                ++word_;
                advance();
            }
            return *this;
        }
        Iterator operator++(int) {
            Iterator tmp = *this;
            ++*this;
            return tmp;
        }
        bool operator==(const Iterator& other) const {
            return word_ == other.word_ && current_ == other.current_;
        }

    private:
        void advance();

        const FilterBitmap* owner_ = nullptr;
        std::size_t word_ = 0;
        word_t current_ = 0;
    };

    Iterator begin() const { return Iterator(this, 0); }
    Iterator end() const { return Iterator(this, words_.size()); }
    std::vector<idx_t> positions() const;

    friend bool operator==(const FilterBitmap& a, const FilterBitmap& b) {
        return a.n_ == b.n_ && a.words_ == b.words_;
    }

private:
    std::vector<word_t> words_;
    std::size_t n_ = 0;
    std::size_t count_ = 0;
};

inline void FilterBitmap::Iterator::advance() {
    const auto& words = owner_->words_;
    while (word_ < words.size() && words[word_] == 0) {
        ++word_;
    }
    current_ = word_ < words.size() ? words[word_] : 0;
}

/// Per-call instrumentation for the filter-map cost contract.
struct FilterStats {
    std::size_t combine_passes = 0;   // word-wise AND/OR sweeps
    std::size_t words_touched = 0;
    std::size_t verified = 0;         // exact set comparisons (equality)
};

/// One bitmap per label id: bit i of bitset(L) is set iff record i carries L.
class InvertedLabelIndex {
public:
    InvertedLabelIndex() = default;
    explicit InvertedLabelIndex(std::span<const LabelSet> labels);

    std::size_t size() const { return n_; }
    std::size_t label_count() const { return bitsets_.size(); }
    /// Unknown labels map to the all-zero bitmap.
    const FilterBitmap& bitset(label_t label) const {
        return label < bitsets_.size() ? bitsets_[label] : empty_;
    }
    std::size_t storage_words() const;

private:
    std::vector<FilterBitmap> bitsets_;
    FilterBitmap empty_;
    std::size_t n_ = 0;
};

InvertedLabelIndex build_inverted_index(const Dataset& dataset);

/// Bitmap of records satisfying `constraint` against `query`.
///
/// Containment ANDs the query labels' bitsets, Overlap ORs them; the equality
/// constraints AND and then compare each survivor's full label set.
FilterBitmap filter_map(const InvertedLabelIndex& index,
                        const LabelSet& query,
                        Constraint constraint,
                        std::span<const LabelSet> labels,
                        FilterStats* stats = nullptr);

/// Reference path: one satisfies() call per record.
FilterBitmap filter_map_scan(std::span<const LabelSet> labels, const LabelSet& query, Constraint constraint);

}  // namespace fanns
