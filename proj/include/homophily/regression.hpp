#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/inference.hpp"

namespace homophily {

/// One terminal field of the secondary regression.
struct TerminalCovariates {
    Index field = 0;
    std::string field_id;
    /// Top-level field, used as the cluster.
    Index top_field = 0;
    int significant = 0;
    /// Female share among solo authorships over female share among
    /// authorships on multi-author papers.
    double ratio = 0.0;
    /// Log of the number of authorships (solo and multi).
    double log_size = 0.0;
    /// Female share over all authorships.
    double female_share = 0.0;
    int majority_female = 0;
    double interaction = 0.0;
    std::size_t solo_authorships = 0;
    std::size_t multi_authorships = 0;
};

struct DroppedField {
    std::string field_id;
    std::string reason;
};

struct CovariateTable {
    std::vector<TerminalCovariates> rows;
    std::vector<DroppedField> dropped;

    void write_csv(std::ostream& out) const;
};

/// `corpus` is the snapshot before cleaning (solo papers still present);
/// significance comes from `results`, matched by field id. Shares count every
/// authorship, Unassigned ones included, in the denominator.
CovariateTable build_covariates(const Corpus& corpus, const TestSuiteResult& results);

/// Intercept plus ratio, log_size, female_share, majority_female and their
/// interaction; outcome is `significant`, clusters are top-level fields.
struct Design {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::vector<double> outcome;
    std::vector<std::int64_t> clusters;
};

Design design_from(const CovariateTable& table);

struct GEEOptions {
    double tolerance = 1e-8;
    std::size_t max_iterations = 50;
    /// Scale the sandwich by G / (G - 1) for G clusters.
    bool small_sample_correction = false;
};

struct GEEFit {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> z;
    std::vector<double> p_values;
    bool converged = false;
    std::size_t iterations = 0;
    bool separation = false;
    std::string diagnostic;
    std::size_t clusters = 0;
    std::size_t observations = 0;

    void write_csv(std::ostream& out) const;
    nlohmann::json to_json() const;
};

/// Logistic GEE with independence working covariance: iteratively
/// reweighted least squares for the estimates, cluster sandwich for the
/// standard errors.
GEEFit fit_gee_logistic(const std::vector<std::vector<double>>& rows, const std::vector<double>& outcome,
                        const std::vector<std::int64_t>& clusters, std::vector<std::string> names = {},
                        const GEEOptions& options = {});
GEEFit fit_gee_logistic(const Design& design, const GEEOptions& options = {});

}  // namespace homophily
