#include "homophily/regression.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include <Eigen/Dense>

#include "homophily/error.hpp"

namespace homophily {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

double logistic(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

}  // namespace

void CovariateTable::write_csv(std::ostream& out) const {
    out << "field,cluster,significant,ratio,log_size,female_share,majority_female,interaction,solo_authorships,"
           "multi_authorships\n";
    for (const auto& r : rows)
        out << csv_field(r.field_id) << ',' << r.top_field << ',' << r.significant << ',' << r.ratio << ','
            << r.log_size << ',' << r.female_share << ',' << r.majority_female << ',' << r.interaction << ','
            << r.solo_authorships << ',' << r.multi_authorships << '\n';
}

CovariateTable build_covariates(const Corpus& corpus, const TestSuiteResult& results) {
    std::map<std::string, const FieldResult*> tested;
    for (const auto& r : results.fields) tested[r.field_id] = &r;

    struct Tally {
        std::size_t solo = 0, solo_f = 0, multi = 0, multi_f = 0;
    };
    std::vector<Tally> tally(corpus.fields().size());
    for (const auto& p : corpus.papers()) {
        auto& t = tally[p.field];
        for (Index a : p.authorships) {
            const bool fem = corpus.authorships()[a].gender == Gender::Female;
            if (p.authorships.size() == 1) {
                ++t.solo;
                t.solo_f += fem;
            } else {
                ++t.multi;
                t.multi_f += fem;
            }
        }
    }

    CovariateTable table;
    for (Index f : corpus.terminal_fields()) {
        const auto& id = corpus.fields()[f].id;
        const auto& t = tally[f];
        auto it = tested.find(id);
        if (it == tested.end()) {
            table.dropped.push_back({id, "field was not tested"});
            continue;
        }
        if (t.solo == 0) {
            table.dropped.push_back({id, "no solo authorships (ratio undefined)"});
            continue;
        }
        if (t.multi_f == 0) {
            table.dropped.push_back({id, "no female multi-author authorships (ratio undefined)"});
            continue;
        }
        TerminalCovariates r;
        r.field = f;
        r.field_id = id;
        r.top_field = *corpus.top_level_of(f);
        r.significant = it->second->significant ? 1 : 0;
        r.ratio = (double(t.solo_f) / double(t.solo)) / (double(t.multi_f) / double(t.multi));
        r.log_size = std::log(double(t.solo + t.multi));
        r.female_share = double(t.solo_f + t.multi_f) / double(t.solo + t.multi);
        r.majority_female = r.female_share > 0.5 ? 1 : 0;
        r.interaction = r.female_share * r.majority_female;
        r.solo_authorships = t.solo;
        r.multi_authorships = t.multi;
        table.rows.push_back(r);
    }
    return table;
}

Design design_from(const CovariateTable& table) {
    Design d;
    d.names = {"intercept", "ratio", "log_size", "female_share", "majority_female", "female_share:majority_female"};
    for (const auto& r : table.rows) {
        d.rows.push_back({1.0, r.ratio, r.log_size, r.female_share, double(r.majority_female), r.interaction});
        d.outcome.push_back(r.significant);
        d.clusters.push_back(r.top_field);
    }
    return d;
}

GEEFit fit_gee_logistic(const std::vector<std::vector<double>>& rows, const std::vector<double>& outcome,
                        const std::vector<std::int64_t>& clusters, std::vector<std::string> names,
                        const GEEOptions& options) {
    const std::size_t n = rows.size();
    if (n == 0) throw Error("regression", "no observations");
    if (outcome.size() != n || clusters.size() != n)
        throw Error("regression", "rows, outcome and clusters differ in length");
    const std::size_t k = rows[0].size();
    if (k == 0) throw Error("regression", "design has no columns");
    if (names.empty())
        for (std::size_t j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
    if (names.size() != k) throw Error("regression", "one name per column is required");

    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != k) throw Error("regression", "ragged design matrix");
        for (std::size_t j = 0; j < k; ++j) X(i, j) = rows[i][j];
        if (outcome[i] != 0.0 && outcome[i] != 1.0) throw Error("regression", "outcome must be 0 or 1");
        y(i) = outcome[i];
    }
    std::set<std::int64_t> distinct(clusters.begin(), clusters.end());
    if (distinct.size() < 2) throw Error("regression", "at least two clusters are required");
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(X).rank() < Eigen::Index(k))
        throw Error("regression", "design matrix is not full rank");

    GEEFit fit;
    fit.names = std::move(names);
    fit.clusters = distinct.size();
    fit.observations = n;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(Eigen::Index(k));
    Eigen::VectorXd mu(n);
    Eigen::MatrixXd info(k, k);
    auto evaluate = [&] {
        const Eigen::VectorXd eta = X * beta;
        for (std::size_t i = 0; i < n; ++i) mu(i) = logistic(eta(i));
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        info = X.transpose() * w.asDiagonal() * X;
    };
    evaluate();
    for (fit.iterations = 1; fit.iterations <= options.max_iterations; ++fit.iterations) {
        const Eigen::VectorXd step = info.ldlt().solve(X.transpose() * (y - mu));
        beta += step;
        evaluate();
        if (!beta.allFinite()) break;
        if (step.lpNorm<Eigen::Infinity>() < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = std::min(fit.iterations, options.max_iterations);

    const double min_w = (mu.array() * (1.0 - mu.array())).minCoeff();
    if (!beta.allFinite() || (!fit.converged && min_w < 1e-8) || (fit.converged && min_w < 1e-12)) {
        fit.separation = true;
        fit.diagnostic = "fitted probabilities reach 0 or 1; the outcome is (quasi-)separated by the covariates";
    } else if (!fit.converged) {
        fit.diagnostic = "no convergence after " + std::to_string(options.max_iterations) + " iterations";
    }

    const Eigen::MatrixXd bread = info.inverse();
    std::map<std::int64_t, Eigen::VectorXd> scores;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = scores.try_emplace(clusters[i], Eigen::VectorXd::Zero(Eigen::Index(k)));
        it->second += X.row(Eigen::Index(i)).transpose() * (y(i) - mu(i));
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(Eigen::Index(k), Eigen::Index(k));
    for (const auto& [g, u] : scores) meat += u * u.transpose();
    Eigen::MatrixXd cov = bread * meat * bread;
    if (options.small_sample_correction) {
        const double g = double(fit.clusters);
        cov *= g / (g - 1.0);
    }
    for (std::size_t j = 0; j < k; ++j) {
        const double b = beta(Eigen::Index(j));
        const double se = std::sqrt(std::max(0.0, cov(Eigen::Index(j), Eigen::Index(j))));
        fit.coefficients.push_back(b);
        fit.std_errors.push_back(se);
        const double z = se > 0 ? b / se : std::numeric_limits<double>::quiet_NaN();
        fit.z.push_back(z);
        fit.p_values.push_back(std::isnan(z) ? std::numeric_limits<double>::quiet_NaN()
                                             : std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
    return fit;
}

GEEFit fit_gee_logistic(const Design& design, const GEEOptions& options) {
    return fit_gee_logistic(design.rows, design.outcome, design.clusters, design.names, options);
}

void GEEFit::write_csv(std::ostream& out) const {
    out << "term,estimate,robust_se,robust_z,p_value\n";
    out.precision(10);
    for (std::size_t j = 0; j < names.size(); ++j)
        out << csv_field(names[j]) << ',' << coefficients[j] << ',' << std_errors[j] << ',' << z[j] << ','
            << p_values[j] << '\n';
}

nlohmann::json GEEFit::to_json() const {
    auto terms = nlohmann::json::array();
    for (std::size_t j = 0; j < names.size(); ++j)
        terms.push_back({{"term", names[j]},
                         {"estimate", coefficients[j]},
                         {"robust_se", std_errors[j]},
                         {"robust_z", std::isnan(z[j]) ? nlohmann::json() : nlohmann::json(z[j])},
                         {"p_value", std::isnan(p_values[j]) ? nlohmann::json() : nlohmann::json(p_values[j])}});
    return {{"terms", terms},
            {"converged", converged},
            {"iterations", iterations},
            {"separation", separation},
            {"diagnostic", diagnostic},
            {"clusters", clusters},
            {"observations", observations}};
}

}  // namespace homophily
