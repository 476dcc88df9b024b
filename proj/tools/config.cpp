#include "config.hpp"

#include <algorithm>

#include "homophily/error.hpp"

namespace homophily::cli {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw Error("cli", message);
}

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void PipelineConfig::validate() {
    require(ingest.year_min <= ingest.year_max, "year window is empty");
    require(ingest.max_depth >= 1, "max depth must be at least 1");
    require(imputation_threshold > 0.5 && imputation_threshold <= 1.0, "imputation threshold must lie in (0.5, 1]");
    require(unit(flow_threshold), "flow threshold must lie in [0, 1]");
    require(chains >= 1, "at least one chain is required");
    require(chain.iterations > chain.burn_in, "iterations must exceed burn-in");
    require(chain.thin >= 1, "thin must be at least 1");
    require(chain.continue_prob >= 0.0 && chain.continue_prob < 1.0, "continue probability must lie in [0, 1)");
    require(chain.proposals_per_iteration >= 1, "proposals per iteration must be at least 1");
    require(threads >= 1, "threads must be at least 1");
    require(test.rate > 0.0 && test.rate < 1.0, "FDR rate must lie in (0, 1)");
    require(bins >= 1, "histogram needs at least one bin");
    require(scenario == "low" || scenario == "high" || scenario == "both", "scenario must be low, high or both");
    require(imputations >= 1, "at least one imputation is required");
    require(naive_level >= 1, "naive level must be at least 1");
    require(ks_reps >= 1, "at least one resampling replicate is required");
    require(enumeration_cap >= 1, "enumeration cap must be positive");
    require(synth_top >= 1 && synth_leaves >= 1 && synth_papers >= 1, "synthetic tree must be non-empty");
    require(unit(synth_homophily) && unit(synth_missing) && unit(synth_cross_flow),
            "synthetic homophily, missing rate and cross flow must lie in [0, 1]");
    test.procedure = parse_fdr_procedure(fdr);
    if (exclude_root) test.include_root = false;
    chain.length_mode = parse_cycle_length_mode(length_mode);
}

std::size_t PipelineConfig::chain_threads() const { return std::max<std::size_t>(1, std::min(threads, chains)); }

std::vector<ChainPlan> PipelineConfig::plans() const {
    ChainPlan base = chain;
    base.threads = std::max<std::size_t>(1, threads / chain_threads());
    return chain_plans(base, chains);
}

nlohmann::json PipelineConfig::to_json() const {
    auto paths = [](const std::vector<std::filesystem::path>& ps) {
        std::vector<std::string> out;
        for (const auto& p : ps) out.push_back(p.string());
        return out;
    };
    return {{"command", command},
            {"inputs",
             {{"papers", papers.string()},
              {"authorships", authorships.string()},
              {"hierarchy", hierarchy.string()},
              {"flows", flows.string()},
              {"corpus", corpus.string()},
              {"results", results.string()},
              {"traces", traces.string()},
              {"spec", spec.string()},
              {"name_tables", paths(name_tables)}}},
            {"out", out.string()},
            {"year_window", {ingest.year_min, ingest.year_max}},
            {"max_depth", ingest.max_depth},
            {"imputation_threshold", imputation_threshold},
            {"flow_threshold", flow_threshold},
            {"chains", chains},
            {"chain", chain.to_json()},
            {"test", test.to_json()},
            {"threads", threads},
            {"trace_csv", trace_csv},
            {"bins", bins},
            {"sensitivity", {{"scenario", scenario}, {"imputations", imputations}, {"seed", imputation_seed}}},
            {"naive_level", naive_level},
            {"ks", {{"reps", ks_reps}, {"with_replacement", ks_with_replacement}, {"seed", ks_seed}}},
            {"exact", exact},
            {"small_sample", small_sample},
            {"enumeration_cap", enumeration_cap},
            {"synth",
             {{"top_fields", synth_top},
              {"leaves_per_top", synth_leaves},
              {"papers_per_leaf", synth_papers},
              {"solo_papers_per_leaf", synth_solo},
              {"homophily", synth_homophily},
              {"missing_rate", synth_missing},
              {"cross_flow", synth_cross_flow},
              {"seed", synth_seed}}}};
}

}  // namespace homophily::cli
