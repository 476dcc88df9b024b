#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/flow.hpp"
#include "homophily/metrics.hpp"
#include "homophily/rng.hpp"

namespace homophily {

/// Marker stored in traces for samples where a field holds a single gender.
inline constexpr double kUndefinedAlpha = std::numeric_limits<double>::quiet_NaN();

/// How the cycle length of a proposal is drawn.
enum class CycleLengthMode {
    /// Length l >= 2 with P(l) = (1 - c) c^(l - 2): after a_1 and a_2 the
    /// cycle is extended with probability c per step.
    Geometric,
    /// L ~ Geometric on {1, 2, ...} with P(L) = (1 - c) c^(L - 1); the cycle
    /// has length max(L, 2).
    ClampedGeometric,
};

std::string_view to_string(CycleLengthMode m) noexcept;
CycleLengthMode parse_cycle_length_mode(std::string_view s);

struct ChainPlan {
    std::size_t iterations = 45000;
    std::size_t burn_in = 20000;
    /// Record every `thin`-th post-burn-in iteration.
    std::size_t thin = 1;
    std::uint64_t seed = 1;
    double continue_prob = 0.5;
    /// Field indices to record; empty means every field holding papers.
    std::vector<Index> tracked_fields;
    /// Proposals per iteration, scaled by each flow component's share of the
    /// authorships (at least one per component).
    std::size_t proposals_per_iteration = 1;
    CycleLengthMode length_mode = CycleLengthMode::Geometric;
    /// Verify the conservation laws after every iteration.
    bool check_invariants = false;
    std::size_t threads = 1;

    std::size_t samples() const noexcept { return thin ? (iterations - burn_in + thin - 1) / thin : 0; }
    void validate(const Corpus& corpus) const;
    nlohmann::json to_json() const;
    static ChainPlan from_json(const nlohmann::json& j);
};

/// Slots are the (paper, position) places authorships can occupy, grouped by
/// terminal field and then by paper. Slot layout never changes; only which
/// authorship occupies a slot does.
class SlotLayout {
public:
    explicit SlotLayout(const Corpus& corpus);

    std::size_t slot_count() const noexcept { return slot_paper_.size(); }
    std::size_t terminal_count() const noexcept { return terminal_begin_.size() - 1; }
    Index paper_of_slot(std::uint32_t s) const { return slot_paper_[s]; }
    Index terminal_of_slot(std::uint32_t s) const { return slot_terminal_[s]; }
    std::span<const std::uint32_t> terminal_begin() const noexcept { return terminal_begin_; }
    std::uint32_t observed_slot(Index authorship) const { return observed_slot_[authorship]; }
    Index origin_terminal(Index authorship) const { return slot_terminal_[observed_slot_[authorship]]; }
    std::size_t paper_count() const noexcept { return paper_size_.size(); }
    std::size_t paper_size(Index paper) const { return paper_size_[paper]; }
    std::uint32_t paper_first_slot(Index paper) const { return paper_first_slot_[paper]; }
    Index paper_terminal(Index paper) const { return paper_terminal_[paper]; }

private:
    std::vector<Index> slot_paper_;
    std::vector<Index> slot_terminal_;
    std::vector<std::uint32_t> terminal_begin_;
    std::vector<std::uint32_t> observed_slot_;
    std::vector<std::size_t> paper_size_;
    std::vector<std::uint32_t> paper_first_slot_;
    std::vector<Index> paper_terminal_;
};

/// Assignment of every authorship to a slot (the MCMC state). Starts at the
/// observed configuration and maintains per-paper male counts and per
/// terminal alpha sufficient statistics incrementally, in exact integers.
class Configuration {
public:
    Configuration(const Corpus& corpus, const SlotLayout& layout);

    const SlotLayout& layout() const noexcept { return *layout_; }
    std::size_t size() const noexcept { return slot_of_.size(); }
    std::uint32_t slot_of(Index a) const { return slot_of_[a]; }
    Index occupant(std::uint32_t s) const { return occupant_[s]; }
    Index paper_of(Index a) const { return layout_->paper_of_slot(slot_of_[a]); }
    Index terminal_of(Index a) const { return layout_->terminal_of_slot(slot_of_[a]); }
    Gender gender(Index a) const { return is_male_[a] ? Gender::Male : Gender::Female; }
    std::int64_t male_count(Index paper) const { return paper_males_[paper]; }

    MixingSums terminal_sums(Index terminal) const;
    /// Sums over every terminal below `field`.
    MixingSums field_sums(const Corpus& corpus, Index field) const;
    /// Current papers of `field`, as gender lists (for the literal formula).
    std::vector<PaperGenders> field_papers(const Corpus& corpus, Index field) const;

    /// Moves a_i into the slot of a_{i+1} and a_l into the slot of a_1.
    void apply_cycle(std::span<const Index> cycle);

    /// Throws if any conservation law or cached statistic is violated.
    void verify(const Corpus& corpus) const;

    std::vector<std::uint32_t> assignment() const { return slot_of_; }
    void set_assignment(std::span<const std::uint32_t> slot_of);

private:
    void rebuild();
    void update_paper(Index paper, std::int64_t old_males);

    const SlotLayout* layout_;
    std::vector<std::uint32_t> slot_of_;
    std::vector<Index> occupant_;
    std::vector<std::uint8_t> is_male_;
    std::vector<std::int64_t> paper_males_;

    // Per terminal, one accumulator per distinct paper size.
    std::vector<std::size_t> class_begin_;
    std::vector<std::int64_t> class_size_;
    std::vector<std::int64_t> class_mm_;  // sum m (m - 1)
    std::vector<std::int64_t> class_fm_;  // sum f m
    std::vector<std::size_t> paper_class_;
    std::vector<std::int64_t> terminal_males_;
    std::vector<std::int64_t> terminal_total_;
    std::int64_t observed_males_ = 0;
};

/// Authorships currently sitting in any field an authorship originating in
/// `terminal` may move into.
std::vector<Index> candidate_set(const Configuration& config, const CandidateIndex& candidates, Index terminal);

struct CycleProposal {
    std::vector<Index> authorships;  // a_1 ... a_l
};

/// Draws a cycle per the proposal procedure: a_1 uniform over `pool`, each
/// following authorship uniform over the candidate set of the previous one's
/// original field.
CycleProposal propose_cycle(const Configuration& config, const CandidateIndex& candidates,
                            std::span<const Index> pool, Rng& rng, double continue_prob,
                            CycleLengthMode mode = CycleLengthMode::Geometric);

/// Ratio of null densities P(proposed) / P(current); 0 when the cycle repeats
/// an authorship or moves one into an unsupported field.
double acceptance_ratio(const Configuration& config, const CycleProposal& proposal, const SwapMatrix& matrix);

/// Probability that propose_cycle emits this cycle (of distinct authorships)
/// in any rotation from the given configuration.
double proposal_probability(const Configuration& config, const SwapMatrix& matrix, const CandidateIndex& candidates,
                            std::span<const Index> cycle, std::size_t pool_size, double continue_prob,
                            CycleLengthMode mode = CycleLengthMode::Geometric);

struct ChainCounters {
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    std::uint64_t zero_density = 0;
    /// Sum over recorded samples of the fraction of authorships sitting in
    /// their original terminal field.
    double origin_retention_sum = 0.0;
    std::uint64_t recorded = 0;

    double acceptance_rate() const { return proposals ? double(accepted) / double(proposals) : 0.0; }
    double mean_origin_retention() const { return recorded ? origin_retention_sum / double(recorded) : 0.0; }
};

struct ChainRun {
    ChainPlan plan;
    std::vector<Index> fields;                // tracked field indices
    std::vector<std::vector<double>> traces;  // parallel to `fields`; NaN = undefined
    ChainCounters counters;
    std::string checkpoint;

    const std::vector<double>& trace(Index field) const;
    bool has_field(Index field) const;
};

/// Runs one chain. Flow components evolve independently, each with its own
/// random stream, and are stitched into traces sample by sample.
class ChainSampler {
public:
    ChainSampler(const Corpus& corpus, const SwapMatrix& matrix, ChainPlan plan);

    /// Resumes from a checkpoint written by an identical plan.
    static ChainSampler restore(const Corpus& corpus, const SwapMatrix& matrix, ChainPlan plan,
                                std::string_view checkpoint);

    void advance(std::size_t iterations);
    std::size_t completed() const noexcept { return completed_; }
    std::string checkpoint() const;
    /// Traces recorded by this instance (a restored sampler holds only the
    /// samples recorded after the restore).
    ChainRun finish();

    const Configuration& configuration() const noexcept { return config_; }
    const CandidateIndex& candidates() const noexcept { return candidates_; }
    const FieldComponents& field_components() const noexcept { return components_; }

    /// Called after every iteration; forces serial execution.
    void set_observer(std::function<void(std::size_t, const Configuration&)> observer) {
        observer_ = std::move(observer);
    }

private:
    struct Component {
        std::vector<Index> terminals;
        std::vector<Index> authorships;
        std::size_t proposals_per_iteration = 1;
        Rng rng;
        std::int64_t in_origin = 0;
        ChainCounters counters;
    };

    void step(Component& c);
    void run_block(std::size_t length);

    const Corpus* corpus_;
    const SwapMatrix* matrix_;
    ChainPlan plan_;
    SlotLayout layout_;
    Configuration config_;
    CandidateIndex candidates_;
    FieldComponents components_;
    std::vector<Component> parts_;
    std::vector<Index> fields_;
    std::vector<std::vector<double>> traces_;
    double origin_retention_sum_ = 0.0;
    std::uint64_t recorded_ = 0;
    std::size_t completed_ = 0;
    std::function<void(std::size_t, const Configuration&)> observer_;
};

ChainRun run_chain(const Corpus& corpus, const SwapMatrix& matrix, const ChainPlan& plan);

/// Default tracked set: every field with at least one paper.
std::vector<Index> fields_with_papers(const Corpus& corpus);

/// Long-format CSV: sample_index, field_id, alpha ("NA" when undefined).
void write_trace_csv(const ChainRun& run, const Corpus& corpus, std::ostream& out);
/// Columnar binary: magic, JSON header (plan, fields, counters), then one
/// little-endian double column per field.
void write_trace_binary(const ChainRun& run, const Corpus& corpus, std::ostream& out);
ChainRun read_trace_binary(std::istream& in, const Corpus& corpus);

}  // namespace homophily
