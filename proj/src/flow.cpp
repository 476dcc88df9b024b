#include "homophily/flow.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>

#include "homophily/error.hpp"
#include "tsv.hpp"

namespace homophily {

SwapMatrix::SwapMatrix(std::size_t n, const std::vector<std::vector<SwapEntry>>& rows) {
    if (rows.size() != n) throw Error("flow", "row count mismatch");
    offsets_.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < rows[j].size(); ++i) {
            const auto& e = rows[j][i];
            if (e.column >= n || !(e.value > 0.0)) throw Error("flow", "invalid swap matrix entry");
            if (i > 0 && rows[j][i - 1].column >= e.column) throw Error("flow", "swap matrix rows must be sorted");
            entries_.push_back(e);
        }
        offsets_[j + 1] = entries_.size();
    }
}

double SwapMatrix::operator()(Index j, Index k) const {
    auto r = row(j);
    auto it = std::lower_bound(r.begin(), r.end(), k, [](const SwapEntry& e, Index c) { return e.column < c; });
    return (it != r.end() && it->column == k) ? it->value : 0.0;
}

void SwapMatrix::write_tsv(std::ostream& out, std::span<const std::string> names) const {
    auto label = [&](Index i) { return i < names.size() ? names[i] : std::to_string(i); };
    out << "from_field_id\tto_field_id\tprobability\n";
    for (Index j = 0; j < size(); ++j)
        for (const auto& e : row(j)) out << label(j) << '\t' << label(e.column) << '\t' << detail::format_double(e.value) << '\n';
}

SwapMatrix build_swap_matrix(std::size_t n, std::span<const FlowInput> flows, double threshold,
                             std::span<const std::string> names) {
    auto label = [&](Index i) { return i < names.size() ? names[i] : std::to_string(i); };
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("flow", "threshold must lie in [0, 1]");

    std::vector<std::map<Index, double>> raw(n);
    for (const auto& f : flows) {
        if (f.from >= n || f.to >= n) throw Error("flow", "flow references an unknown terminal field");
        if (!(f.proportion >= 0.0 && f.proportion <= 1.0))
            throw Error("flow", "proportion " + detail::format_double(f.proportion) + " from " + label(f.from) +
                                    " to " + label(f.to) + " lies outside [0, 1]");
        if (!raw[f.from].emplace(f.to, f.proportion).second)
            throw Error("flow", "duplicate flow from " + label(f.from) + " to " + label(f.to));
    }
    for (Index j = 0; j < n; ++j) {
        auto& row = raw[j];
        if (row.count(j)) continue;
        double total = 0.0;
        for (const auto& [k, v] : row) total += v;
        row.emplace(j, std::max(0.0, 1.0 - total));
    }
    for (auto& row : raw) std::erase_if(row, [&](const auto& kv) { return kv.second < threshold || kv.second == 0.0; });

    std::vector<std::map<Index, double>> sym(n);
    for (Index j = 0; j < n; ++j) {
        for (const auto& [k, v] : raw[j]) {
            auto back = raw[k].find(j);
            const double mean = (v + (back == raw[k].end() ? 0.0 : back->second)) / 2.0;
            sym[j][k] = mean;
            sym[k][j] = mean;
        }
    }

    std::vector<std::string> empty_rows;
    std::vector<std::vector<SwapEntry>> rows(n);
    for (Index j = 0; j < n; ++j) {
        double total = 0.0;
        for (const auto& [k, v] : sym[j]) total += v;
        if (!(total > 0.0)) {
            empty_rows.push_back(label(j));
            continue;
        }
        for (const auto& [k, v] : sym[j]) rows[j].push_back({k, v / total});
    }
    if (!empty_rows.empty()) {
        std::string list;
        for (const auto& s : empty_rows) list += (list.empty() ? "" : ", ") + s;
        throw Error("flow", "no reassignment mass left after thresholding for field(s): " + list);
    }
    return SwapMatrix(n, rows);
}

std::vector<std::string> terminal_names(const Corpus& corpus) {
    std::vector<std::string> names;
    for (Index f : corpus.terminal_fields()) names.push_back(corpus.fields()[f].id);
    return names;
}

SwapMatrix build_swap_matrix(const Corpus& corpus, double threshold) {
    std::vector<FlowInput> flows;
    for (const auto& f : corpus.flows())
        flows.push_back({*corpus.terminal_index(f.from), *corpus.terminal_index(f.to), f.proportion});
    auto names = terminal_names(corpus);
    return build_swap_matrix(corpus.terminal_fields().size(), flows, threshold, names);
}

FieldComponents components(const SwapMatrix& matrix) {
    const auto n = matrix.size();
    std::vector<Index> parent(n);
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (Index j = 0; j < n; ++j) {
        for (const auto& e : matrix.row(j)) {
            Index a = find(j), b = find(e.column);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    FieldComponents out;
    out.component_of.assign(n, 0);
    std::vector<std::optional<Index>> label(n);
    for (Index j = 0; j < n; ++j) {
        Index r = find(j);
        if (!label[r]) {
            label[r] = static_cast<Index>(out.members.size());
            out.members.emplace_back();
        }
        out.component_of[j] = *label[r];
        out.members[*label[r]].push_back(j);
    }
    return out;
}

CandidateIndex::CandidateIndex(const SwapMatrix& matrix, std::span<const std::uint32_t> slot_begin) {
    const auto n = matrix.size();
    if (slot_begin.size() != n + 1) throw Error("flow", "slot layout does not match the swap matrix");
    offsets_.assign(n + 1, 0);
    totals_.assign(n, 0);
    for (Index i = 0; i < n; ++i) {
        std::uint64_t running = 0;
        // By support symmetry, the fields k with p*(k, i) > 0 are exactly row i's columns.
        for (const auto& e : matrix.row(i)) {
            const auto count = slot_begin[e.column + 1] - slot_begin[e.column];
            if (count == 0) continue;
            running += count;
            blocks_.push_back({slot_begin[e.column], running});
        }
        totals_[i] = running;
        offsets_[i + 1] = blocks_.size();
    }
}

std::uint32_t CandidateIndex::slot(Index terminal, std::uint64_t k) const {
    auto first = blocks_.begin() + static_cast<std::ptrdiff_t>(offsets_[terminal]);
    auto last = blocks_.begin() + static_cast<std::ptrdiff_t>(offsets_[terminal + 1]);
    auto it = std::upper_bound(first, last, k, [](std::uint64_t v, const Block& b) { return v < b.end; });
    const std::uint64_t start = it == first ? 0 : std::prev(it)->end;
    return it->first_slot + static_cast<std::uint32_t>(k - start);
}

std::vector<std::uint32_t> CandidateIndex::slots(Index terminal) const {
    std::vector<std::uint32_t> out;
    for (std::uint64_t k = 0; k < size(terminal); ++k) out.push_back(slot(terminal, k));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace homophily
