#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "homophily/corpus.hpp"

namespace homophily {

/// Raw citation proportion between terminal fields, by terminal index.
struct FlowInput {
    Index from = 0;
    Index to = 0;
    double proportion = 0.0;
};

struct SwapEntry {
    Index column = 0;
    double value = 0.0;
};

/// Row-stochastic reassignment probabilities over terminal fields, stored
/// row-compressed. Entry (j, k) weighs an authorship originally in field k
/// that currently sits in field j. Support is symmetric.
class SwapMatrix {
public:
    SwapMatrix() = default;
    /// Rows must be sorted by column and hold positive values only.
    SwapMatrix(std::size_t n, const std::vector<std::vector<SwapEntry>>& rows);

    std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::span<const SwapEntry> row(Index j) const {
        return {entries_.data() + offsets_[j], entries_.data() + offsets_[j + 1]};
    }
    double operator()(Index j, Index k) const;
    bool supported(Index j, Index k) const { return (*this)(j, k) > 0.0; }
    std::size_t nonzeros() const noexcept { return entries_.size(); }

    /// Audit dump: one `from\tto\tprobability` line per positive entry.
    void write_tsv(std::ostream& out, std::span<const std::string> names) const;

private:
    std::vector<std::size_t> offsets_;
    std::vector<SwapEntry> entries_;
};

/// Thresholds, support-symmetrizes and row-normalizes citation proportions:
///   1. a field without an explicit self row gets the residual 1 - sum(row);
///   2. proportions below `threshold` become 0;
///   3. p*(j,k) = (p(j,k) + p(k,j)) / 2;
///   4. each row is scaled to sum to 1.
/// `names` (optional) labels fields in error messages.
SwapMatrix build_swap_matrix(std::size_t n_terminals, std::span<const FlowInput> flows, double threshold = 0.05,
                             std::span<const std::string> names = {});
SwapMatrix build_swap_matrix(const Corpus& corpus, double threshold = 0.05);

std::vector<std::string> terminal_names(const Corpus& corpus);

/// Connected components of the positive-support graph.
struct FieldComponents {
    std::vector<Index> component_of;          // per terminal
    std::vector<std::vector<Index>> members;  // per component, ascending

    std::size_t count() const noexcept { return members.size(); }
};

FieldComponents components(const SwapMatrix& matrix);

/// Uniform draws from the candidate set of a terminal field: all slots of the
/// fields that an authorship originating there may move into. Slots of a
/// terminal are contiguous, `slot_begin[t] .. slot_begin[t+1]`, so a draw is a
/// binary search over the neighbouring fields' cumulative sizes.
class CandidateIndex {
public:
    CandidateIndex() = default;
    CandidateIndex(const SwapMatrix& matrix, std::span<const std::uint32_t> slot_begin);

    std::uint64_t size(Index terminal) const { return totals_[terminal]; }
    /// k-th candidate slot of `terminal`, 0 <= k < size(terminal).
    std::uint32_t slot(Index terminal, std::uint64_t k) const;
    /// All candidate slots of `terminal` in increasing order.
    std::vector<std::uint32_t> slots(Index terminal) const;

private:
    struct Block {
        std::uint32_t first_slot;
        std::uint64_t end;  // cumulative count within the terminal's list
    };
    std::vector<std::size_t> offsets_;  // per terminal, into blocks_
    std::vector<Block> blocks_;
    std::vector<std::uint64_t> totals_;
};

}  // namespace homophily
