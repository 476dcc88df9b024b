#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/flow.hpp"
#include "homophily/sampler.hpp"

namespace homophily {

/// Share of trace entries >= observed. NaN entries (undefined alpha) count as
/// 1, and an undefined observed value is compared as 1. With `plus_one` the
/// observed configuration is added to numerator and denominator.
double empirical_pvalue(std::optional<double> observed, std::span<const double> trace, bool plus_one = false);
/// Mean with undefined entries counted as 1.
double expected_alpha(std::span<const double> trace);

enum class FdrProcedure { BH, BY };
std::string_view to_string(FdrProcedure p) noexcept;
FdrProcedure parse_fdr_procedure(std::string_view s);

struct FdrResult {
    std::vector<double> adjusted;
    std::vector<bool> rejected;
};

/// Step-up adjusted p-values; BY inflates by sum_{i<=m} 1/i.
FdrResult fdr_adjust(std::span<const double> pvalues, FdrProcedure procedure, double rate);

struct TestOptions {
    FdrProcedure procedure = FdrProcedure::BY;
    double rate = 0.05;
    /// Put the whole-corpus test in the FDR family.
    bool include_root = true;
    /// One family per level tag instead of one joint family.
    bool per_level_families = false;
    bool plus_one = false;

    nlohmann::json to_json() const;
    static TestOptions from_json(const nlohmann::json& j);
};

struct FieldResult {
    Index field = 0;
    std::string field_id;
    LevelTag level = LevelTag::Terminal;
    std::optional<double> observed_alpha;  // nullopt: single-gender field
    double expected_alpha = 0.0;
    double raw_p = 1.0;
    double adjusted_p = 1.0;
    bool in_family = true;
    bool significant = false;
    double female_share = 0.0;
    double fm_observed = 0.0;
    double fm_expected = 0.0;
    std::size_t samples = 0;

    /// "< 1/N" for a zero proportion, the proportion otherwise.
    std::string p_display() const;
};

struct LevelCount {
    std::size_t significant = 0;
    std::size_t total = 0;
};

struct TestSuiteResult {
    std::vector<FieldResult> fields;
    TestOptions options;
    LevelCount root, top, composite, terminal;

    const FieldResult& result(Index field) const;
    const LevelCount& count(LevelTag tag) const;
    /// Significant fraction at `tag` (0 when nothing was tested there).
    double significant_fraction(LevelTag tag) const;

    nlohmann::json to_json() const;
};

/// Post-burn-in samples of every chain, concatenated per field.
struct PooledTraces {
    std::vector<Index> fields;
    std::vector<std::vector<double>> traces;

    const std::vector<double>& trace(Index field) const;
};

/// All chains must track the same fields.
PooledTraces pool_traces(std::span<const ChainRun> runs);

/// Tests every field with authorships; a field missing from the traces is an
/// error.
TestSuiteResult evaluate_traces(const Corpus& corpus, const PooledTraces& pooled, const TestOptions& options = {});

/// Plans for `chains` chains that differ only in seed (base seed + chain).
std::vector<ChainPlan> chain_plans(const ChainPlan& base, std::size_t chains);

/// Runs the chains (concurrently, `chain_threads` at a time), then pools and
/// evaluates.
struct FullTestResult {
    std::vector<ChainRun> runs;
    PooledTraces pooled;
    TestSuiteResult suite;
};

FullTestResult run_full_test(const Corpus& corpus, const SwapMatrix& matrix, std::span<const ChainPlan> plans,
                             const TestOptions& options = {}, std::size_t chain_threads = 1);

/// Summary rows for the root and every top-level field.
void write_results_table(const TestSuiteResult& result, const Corpus& corpus, std::ostream& out);
/// One row per tested field.
void write_field_results(const TestSuiteResult& result, std::ostream& out);
/// Binned null alpha per field with its observed value.
nlohmann::json histogram_json(const TestSuiteResult& result, const PooledTraces& pooled, std::size_t bins = 40);
/// Hierarchy with per-node p-values for shading.
nlohmann::json tree_json(const TestSuiteResult& result, const Corpus& corpus);

/// Corpus in which every depth-`level` subtree is one terminal field.
struct NaiveNull {
    Corpus corpus;
    SwapMatrix matrix;
    /// Field index in the collapsed corpus for every original field, or
    /// nullopt for fields folded into a deeper pseudo-terminal.
    std::vector<std::optional<Index>> field_map;
};

NaiveNull build_naive_null(const Corpus& corpus, int level, double threshold = 0.05);

}  // namespace homophily
