#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/sampler.hpp"

namespace homophily {

/// sup |ECDF_a - ECDF_b|; NaN entries are read as alpha = 1.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct KSOptions {
    std::size_t reps = 1000;
    /// Draw both groups with replacement from the pooled sample instead of
    /// splitting a permutation of it.
    bool with_replacement = false;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

struct KSResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t reps = 0;
};

/// Two-sample KS statistic with a pooled-resampling p-value: the share of
/// replicates whose statistic reaches the observed one.
KSResult ks_two_sample(std::span<const double> a, std::span<const double> b, const KSOptions& options = {});

/// P(D_n >= d) for the one-sample statistic against a continuous distribution.
/// Exact (Marsaglia-Tsang-Wang) for moderate n, Stephens-corrected
/// asymptotic series otherwise.
double kolmogorov_pvalue(double d, std::size_t n);

struct UniformityTest {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample KS of `values` against Uniform(0, 1).
UniformityTest ks_uniformity(std::span<const double> values);

struct KSRow {
    Index field = 0;
    std::string field_id;
    std::size_t chain_a = 0;
    std::size_t chain_b = 0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t reps = 0;
};

struct KSReport {
    std::vector<KSRow> rows;
    UniformityTest uniformity;
    /// Uniformity test not rejected at `uniformity_level`.
    bool approximately_uniform = true;
    double uniformity_level = 0.01;

    void write_csv(std::ostream& out) const;
    /// Sorted p-values against uniform quantiles, for a scatter plot.
    nlohmann::json scatter_json() const;
    nlohmann::json to_json() const;
};

/// Every chain pair on every requested field (empty: all tracked fields).
/// Plans must agree on everything except seed, burn-in and thread count.
KSReport compare_chains(std::span<const ChainRun> runs, const Corpus& corpus, std::span<const Index> fields = {},
                        const KSOptions& options = {});

/// Batch-means Monte Carlo standard error of the mean (undefined read as 1).
double batch_means_se(std::span<const double> trace, std::size_t batches = 20);

}  // namespace homophily
