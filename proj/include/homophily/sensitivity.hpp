#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/inference.hpp"
#include "homophily/rng.hpp"
#include "homophily/sampler.hpp"

namespace homophily {

enum class ImputationKind {
    /// Each missing gender is drawn from its terminal field's assigned shares.
    LowHomophily,
    /// Each missing gender is drawn from its own paper's assigned shares; a
    /// paper with none draws one gender for all of its authorships.
    HighHomophily,
};

std::string_view to_string(ImputationKind k) noexcept;
ImputationKind parse_imputation_kind(std::string_view s);

struct ImputationScenario {
    ImputationKind kind = ImputationKind::LowHomophily;
    std::size_t imputations = 10;
    /// Imputation m draws from Rng(base_seed + m).
    std::uint64_t base_seed = 1;
};

/// Fills every Unassigned authorship. Shares are taken from the assigned
/// authorships of the input only, never from earlier draws.
Corpus impute_missing(const Corpus& corpus, ImputationKind kind, Rng& rng);

struct SensitivityPlan {
    /// Chain plan for every imputed data set (9,000 post-burn-in samples).
    ChainPlan chain = [] {
        ChainPlan p;
        p.iterations = 29000;
        p.burn_in = 20000;
        return p;
    }();
    std::size_t chains = 1;
    TestOptions test;
    double flow_threshold = 0.05;
    /// Imputations processed at once.
    std::size_t threads = 1;
};

struct SensitivityRow {
    std::size_t imputation = 0;
    double terminal = 0.0;
    double composite = 0.0;
    double top = 0.0;
    LevelCount terminal_count, composite_count, top_count;
};

struct SensitivityReport {
    ImputationKind kind = ImputationKind::LowHomophily;
    std::vector<SensitivityRow> rows;
    /// Column means of `rows`.
    double terminal = 0.0;
    double composite = 0.0;
    double top = 0.0;

    void write_csv(std::ostream& out) const;
    nlohmann::json to_json() const;
};

/// Imputes, cleans and tests `scenario.imputations` data sets.
SensitivityReport run_sensitivity(const Corpus& corpus, const ImputationScenario& scenario,
                                  const SensitivityPlan& plan = {});

}  // namespace homophily
