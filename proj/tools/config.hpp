#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/inference.hpp"
#include "homophily/sampler.hpp"
#include "homophily/validation.hpp"

namespace homophily::cli {

/// Everything a subcommand reads from flags, environment or config file.
/// Each subcommand binds only the subset it uses.
struct PipelineConfig {
    std::string command;

    std::filesystem::path papers, authorships, hierarchy, flows;
    std::filesystem::path corpus, results, traces, spec;
    std::vector<std::filesystem::path> name_tables;
    std::filesystem::path out = "out";

    IngestConfig ingest;
    double imputation_threshold = 0.95;
    double flow_threshold = 0.05;

    ChainPlan chain;
    std::size_t chains = 3;
    std::string length_mode = "geometric";
    std::string fdr = "BY";
    TestOptions test;
    bool exclude_root = false;
    std::size_t threads = 1;
    bool trace_csv = false;
    std::size_t bins = 40;

    std::string scenario = "both";
    std::size_t imputations = 10;
    std::uint64_t imputation_seed = 1;

    int naive_level = 1;

    std::size_t ks_reps = 1000;
    bool ks_with_replacement = false;
    std::uint64_t ks_seed = 1;

    bool exact = false;
    bool small_sample = false;
    std::uint64_t enumeration_cap = kDefaultEnumerationCap;

    std::size_t synth_top = 2;
    std::size_t synth_leaves = 3;
    std::size_t synth_papers = 40;
    std::size_t synth_solo = 0;
    double synth_homophily = 0.0;
    double synth_missing = 0.0;
    double synth_cross_flow = 0.0;
    std::uint64_t synth_seed = 1;

    /// Range checks on every numeric setting; resolves `fdr` and
    /// `length_mode` into `test` and `chain`. Throws Error("cli", ...).
    void validate();

    /// Plans for `chains` chains, with worker threads split between chains
    /// and flow components.
    std::vector<ChainPlan> plans() const;
    std::size_t chain_threads() const;

    nlohmann::json to_json() const;
};

}  // namespace homophily::cli
