#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/flow.hpp"
#include "homophily/metrics.hpp"

namespace homophily {

struct SynthField {
    std::string id;
    /// Position of the parent in SynthSpec::fields; none for top-level fields.
    std::optional<std::size_t> parent;
    /// Multi-author papers; only leaves may hold papers.
    std::size_t papers = 0;
    double female_share = 0.5;
    /// Overrides SynthSpec::homophily for this leaf.
    std::optional<double> homophily;
    /// Exact pool composition; both must be set together and must add up to the
    /// number of slots the drawn papers need.
    std::optional<std::size_t> females;
    std::optional<std::size_t> males;
    std::size_t solo_papers = 0;
};

struct SynthSpec {
    std::vector<SynthField> fields;
    /// Probability of a paper having 2, 3, 4, ... authors.
    std::vector<double> size_weights{0.5, 0.3, 0.2};
    /// Probability that each authorship after the first copies the first
    /// author's gender when the pool still holds it; 0 is the null itself.
    double homophily = 0.0;
    /// Citation mass each leaf sends to its sibling leaves, split evenly.
    double cross_flow = 0.0;
    /// Share of authorships whose gender is withheld (Unassigned).
    double missing_rate = 0.0;
    int year = 2000;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults.
    static SynthSpec from_json(const nlohmann::json& j);
};

/// `top_fields` top-level fields with `leaves_per_top` leaves each and
/// `papers_per_leaf` papers per leaf; female shares spread over [0.2, 0.6].
SynthSpec tree_spec(std::size_t top_fields, std::size_t leaves_per_top, std::size_t papers_per_leaf,
                    std::uint64_t seed = 1);

Corpus generate_corpus(const SynthSpec& spec);

struct AlphaAtom {
    std::optional<Rational> alpha;  // nullopt: undefined
    double probability = 0.0;
};

/// Exact null distribution of alpha per field, from a collapsed enumeration
/// over (paper, origin field, gender) count tables weighted by multinomial
/// multiplicities and swap probabilities.
struct ExactNull {
    std::vector<Index> fields;
    std::vector<std::vector<AlphaAtom>> distributions;  // parallel to fields, ascending alpha, undefined last
    std::uint64_t tables = 0;

    const std::vector<AlphaAtom>& distribution(Index field) const;
    /// Mean with undefined alpha counted as 1.
    double expected_alpha(Index field) const;
    /// P(alpha >= observed); undefined counts as 1 on both sides.
    double p_value(Index field, std::optional<double> observed) const;
    nlohmann::json to_json(const Corpus& corpus) const;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

ExactNull enumerate_null_exact(const Corpus& corpus, const SwapMatrix& matrix,
                               std::uint64_t cap = kDefaultEnumerationCap);

/// One document assignment of the full state space: the paper of every
/// authorship, with its normalized null probability.
struct ConfigurationAtom {
    std::vector<Index> paper_of;
    double probability = 0.0;
};

/// Every assignment of authorships to papers (sizes kept, positions within a
/// paper ignored) with positive null density.
std::vector<ConfigurationAtom> enumerate_configurations(const Corpus& corpus, const SwapMatrix& matrix,
                                                        std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace homophily
