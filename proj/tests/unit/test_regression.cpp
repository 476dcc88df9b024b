#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/regression.hpp"
#include "oracles.hpp"

using namespace homophily;
using fixtures::F;
using fixtures::M;
using fixtures::U;

namespace {

struct Data {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<std::int64_t> clusters;
};

Data simulated(std::uint64_t seed, std::size_t n, std::size_t groups, std::vector<double> beta) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 1);
    std::uniform_real_distribution<double> u(0, 1);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row{1.0};
        for (std::size_t j = 1; j < beta.size(); ++j) row.push_back(z(rng));
        double eta = 0;
        for (std::size_t j = 0; j < beta.size(); ++j) eta += beta[j] * row[j];
        d.y.push_back(u(rng) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0);
        d.x.push_back(row);
        d.clusters.push_back(std::int64_t(i % groups));
    }
    return d;
}

}  // namespace

TEST_CASE("covariates per terminal field") {
    CorpusBuilder b;
    auto t = b.add_field("T");
    auto x = b.add_field("X", t);
    auto y = b.add_field("Y", t);
    for (int i = 0; i < 10; ++i) b.add_paper(x, {i < 4 ? F : M});
    for (int i = 0; i < 20; ++i) b.add_paper(x, {i < 10 ? F : M, M});
    b.add_paper(y, {F, F, M});
    b.add_paper(y, {F, M, F});
    auto c = b.build();

    TestSuiteResult results;
    for (Index f : {x, y}) {
        FieldResult r;
        r.field = f;
        r.field_id = c.fields()[f].id;
        r.significant = f == x;
        results.fields.push_back(r);
    }
    auto table = build_covariates(c, results);
    REQUIRE(table.rows.size() == 1);
    const auto& row = table.rows[0];
    CHECK(row.ratio == doctest::Approx(0.4 / 0.25));
    CHECK(row.female_share == doctest::Approx(14.0 / 50));
    CHECK(row.log_size == doctest::Approx(std::log(50.0)));
    CHECK(row.majority_female == 0);
    CHECK(row.interaction == 0.0);
    CHECK(row.significant == 1);
    CHECK(row.top_field == t);
    REQUIRE(table.dropped.size() == 1);
    CHECK(table.dropped[0].field_id == "Y");

    SUBCASE("majority female") {
        CorpusBuilder g;
        auto z = g.add_field("Z");
        for (int i = 0; i < 4; ++i) g.add_paper(z, {F});
        g.add_paper(z, {F, F, M});
        g.add_paper(z, {M, M, F});
        auto cz = g.build();
        TestSuiteResult rz;
        FieldResult r;
        r.field = z;
        r.field_id = "Z";
        rz.fields.push_back(r);
        auto tz = build_covariates(cz, rz);
        REQUIRE(tz.rows.size() == 1);
        CHECK(tz.rows[0].female_share == doctest::Approx(0.7));
        CHECK(tz.rows[0].majority_female == 1);
        CHECK(tz.rows[0].interaction == doctest::Approx(0.7));
    }
    SUBCASE("unassigned authorships stay in the denominators") {
        CorpusBuilder g;
        auto z = g.add_field("Z");
        g.add_paper(z, {F});
        g.add_paper(z, {U});
        g.add_paper(z, {F, U});
        auto cz = g.build();
        TestSuiteResult rz;
        FieldResult r;
        r.field = z;
        r.field_id = "Z";
        rz.fields.push_back(r);
        auto tz = build_covariates(cz, rz);
        REQUIRE(tz.rows.size() == 1);
        CHECK(tz.rows[0].ratio == doctest::Approx(1.0));
        CHECK(tz.rows[0].female_share == doctest::Approx(0.5));
    }
}

TEST_CASE("intercept-only fit has a closed form") {
    std::vector<std::vector<double>> x(8, {1.0});
    std::vector<double> y{1, 0, 0, 0, 1, 0, 0, 0};
    std::vector<std::int64_t> g{0, 0, 1, 1, 2, 2, 3, 3};
    auto fit = fit_gee_logistic(x, y, g);
    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-10));
}

TEST_CASE("estimates match a Newton oracle and standard errors match explicit score sums") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const std::size_t n = 12 + seed % 9;
        auto d = simulated(seed, n, 2 + seed % 4, {0.3, 0.8, -0.5});
        GEEFit fit;
        try {
            fit = fit_gee_logistic(d.x, d.y, d.clusters);
        } catch (const Error&) {
            continue;  // degenerate draw (rank or cluster count)
        }
        if (fit.separation) continue;
        REQUIRE(fit.converged);
        auto oracle = oracles::logistic_newton(d.x, d.y);
        auto se = oracles::sandwich_se(oracle, d.clusters);
        for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
            CHECK(std::abs(fit.coefficients[j] - double(oracle.beta[j])) < 1e-6);
            CHECK(std::abs(fit.std_errors[j] - se[j]) < 1e-10);
            CHECK(fit.std_errors[j] > 0);
            CHECK(fit.p_values[j] >= 0);
            CHECK(fit.p_values[j] <= 1);
            CHECK(fit.z[j] == doctest::Approx(fit.coefficients[j] / fit.std_errors[j]));
        }
    }
}

TEST_CASE("one observation per cluster gives heteroskedasticity-robust errors") {
    auto d = simulated(77, 20, 20, {-0.2, 1.0});
    for (std::size_t i = 0; i < d.clusters.size(); ++i) d.clusters[i] = std::int64_t(i);
    auto fit = fit_gee_logistic(d.x, d.y, d.clusters);
    auto o = oracles::logistic_newton(d.x, d.y);
    // HC0: bread * sum_i s_i s_i' * bread
    for (std::size_t j = 0; j < 2; ++j) {
        long double v = 0;
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            long double proj = 0;
            for (std::size_t a = 0; a < 2; ++a) proj += o.bread[j][a] * o.score[i][a];
            v += proj * proj;
        }
        CHECK(std::abs(fit.std_errors[j] - double(std::sqrt(v))) < 1e-10);
    }
}

TEST_CASE("cluster assignment changes only the standard errors") {
    auto d = simulated(5, 60, 3, {0.1, 0.7, 0.4});
    auto a = fit_gee_logistic(d.x, d.y, d.clusters);
    for (std::size_t i = 0; i < d.clusters.size(); ++i) d.clusters[i] = std::int64_t(i / 12);
    auto b = fit_gee_logistic(d.x, d.y, d.clusters);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.coefficients[j] == doctest::Approx(b.coefficients[j]).epsilon(1e-12));
    CHECK(a.std_errors != b.std_errors);

    GEEOptions corrected;
    corrected.small_sample_correction = true;
    auto c = fit_gee_logistic(d.x, d.y, d.clusters, {}, corrected);
    CHECK(c.std_errors[0] == doctest::Approx(b.std_errors[0] * std::sqrt(5.0 / 4)));
}

TEST_CASE("signs of a size and female-share model are recovered") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<std::int64_t> g;
    for (int i = 0; i < 600; ++i) {
        const double log_size = 3 + 4 * u(rng), share = 0.1 + 0.7 * u(rng);
        const double eta = -8 + 1.45 * log_size + 6.7 * share - 3;
        x.push_back({1.0, log_size, share});
        y.push_back(u(rng) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0);
        g.push_back(i % 12);
    }
    auto fit = fit_gee_logistic(x, y, g, {"intercept", "log_size", "female_share"});
    CHECK(fit.converged);
    CHECK(fit.coefficients[1] > 0);
    CHECK(fit.coefficients[2] > 0);
    std::ostringstream csv;
    fit.write_csv(csv);
    CHECK(csv.str().rfind("term,estimate,robust_se,robust_z,p_value\nintercept,", 0) == 0);
}

TEST_CASE("degenerate designs") {
    std::vector<std::vector<double>> x{{1, 0}, {1, 1}, {1, 2}, {1, 3}};
    std::vector<std::int64_t> g{0, 0, 1, 1};
    auto sep = fit_gee_logistic(x, {0, 0, 1, 1}, g);
    CHECK(sep.separation);
    CHECK_FALSE(sep.diagnostic.empty());
    CHECK_THROWS_AS(fit_gee_logistic(x, {0, 1, 0, 1}, {0, 0, 0, 0}), Error);
    std::vector<std::vector<double>> collinear{{1, 2}, {1, 2}, {1, 2}, {1, 2}};
    CHECK_THROWS_AS(fit_gee_logistic(collinear, {0, 1, 0, 1}, g), Error);
    CHECK_THROWS_AS(fit_gee_logistic(x, {0, 2, 0, 1}, g), Error);
}
