#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/diagnostics.hpp"
#include "homophily/inference.hpp"
#include "homophily/validation.hpp"
#include "oracles.hpp"

using namespace homophily;

namespace {

ChainPlan plan(std::size_t iterations, std::size_t burn_in, std::uint64_t seed) {
    ChainPlan p;
    p.iterations = iterations;
    p.burn_in = burn_in;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("two-sample KS on small examples") {
    const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
    auto same = ks_two_sample(a, a);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK(ks_statistic(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == 1.0);

    KSOptions o;
    o.reps = 4000;
    auto r = ks_two_sample(a, b, o);
    CHECK(r.statistic == doctest::Approx(1.0 / 3));
    const double exact = oracles::ks_exhaustive_pvalue(a, b);
    CHECK(exact == doctest::Approx(1.0));
    CHECK(std::abs(r.p_value - exact) <= 0.05);

    CHECK_THROWS_AS(ks_two_sample(std::vector<double>{}, b), Error);
    o.reps = 0;
    CHECK_THROWS_AS(ks_two_sample(a, b, o), Error);
}

TEST_CASE("KS statistic matches the definition and its symmetries") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> value(0, 6), size(1, 12);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> a(size(rng)), b(size(rng));
        for (auto& v : a) v = value(rng) / 3.0 - 1;
        for (auto& v : b) v = value(rng) / 3.0 - 1;
        const double d = ks_statistic(a, b);
        CHECK(d == doctest::Approx(oracles::ks_brute(a, b)).epsilon(1e-12));
        CHECK(d == ks_statistic(b, a));
        std::vector<double> ta(a), tb(b);
        for (auto& v : ta) v = std::exp(3 * v);
        for (auto& v : tb) v = std::exp(3 * v);
        CHECK(ks_statistic(ta, tb) == doctest::Approx(d).epsilon(1e-12));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("resampled p-values approach the exhaustive permutation value") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> value(0, 3);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t na = 1 + rng() % 3, nb = 1 + rng() % 3;
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = value(rng);
        for (auto& v : b) v = value(rng);
        KSOptions o;
        o.reps = 5000;
        o.seed = std::uint64_t(trial);
        const auto r = ks_two_sample(a, b, o);
        CHECK(std::abs(r.p_value - oracles::ks_exhaustive_pvalue(a, b)) <= 0.05);
    }
    SUBCASE("with replacement stays in range") {
        KSOptions o;
        o.with_replacement = true;
        o.reps = 200;
        auto r = ks_two_sample(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 3, 5}, o);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
    SUBCASE("threads do not change the result") {
        KSOptions o;
        o.reps = 300;
        const std::vector<double> a{.1, .2, .2, .5, .7}, b{.2, .4, .9, .9};
        auto r1 = ks_two_sample(a, b, o);
        o.threads = 3;
        CHECK(ks_two_sample(a, b, o).p_value == r1.p_value);
    }
}

TEST_CASE("Kolmogorov distribution against simulation and tables") {
    // tabulated 5% critical values
    CHECK(kolmogorov_pvalue(0.40925, 10) == doctest::Approx(0.05).epsilon(0.04));
    CHECK(kolmogorov_pvalue(0.29408, 20) == doctest::Approx(0.05).epsilon(0.04));
    CHECK(kolmogorov_pvalue(1.3581 / std::sqrt(5000.0), 5000) == doctest::Approx(0.05).epsilon(0.04));
    CHECK(kolmogorov_pvalue(0.0, 4) == 1.0);
    CHECK(kolmogorov_pvalue(1.0, 4) == 0.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    const int sims = 40000;
    const double d = 0.45;
    int exceed = 0;
    for (int s = 0; s < sims; ++s) {
        std::vector<double> x(5);
        for (auto& v : x) v = u(rng);
        exceed += ks_uniformity(x).statistic >= d;
    }
    CHECK(std::abs(double(exceed) / sims - kolmogorov_pvalue(d, 5)) < 0.01);
}

TEST_CASE("chain comparison") {
    auto c = fixtures::random_tree(3);
    auto m = build_swap_matrix(c);
    SUBCASE("identical seeds give identical traces") {
        std::vector<ChainRun> runs{run_chain(c, m, plan(600, 100, 4)), run_chain(c, m, plan(600, 100, 4))};
        auto rep = compare_chains(runs, c);
        for (const auto& r : rep.rows) CHECK(r.statistic == 0.0);
        std::ostringstream csv;
        rep.write_csv(csv);
        CHECK(csv.str().rfind("field,chain_a,chain_b,statistic,p_value,reps\n", 0) == 0);
        CHECK(rep.to_json()["scatter"].size() == rep.rows.size());
    }
    SUBCASE("mismatched plans are rejected") {
        auto p = plan(600, 100, 5);
        p.continue_prob = 0.7;
        std::vector<ChainRun> runs{run_chain(c, m, plan(600, 100, 4)), run_chain(c, m, p)};
        CHECK_THROWS_AS(compare_chains(runs, c), Error);
        std::vector<ChainRun> one{runs[0]};
        CHECK_THROWS_AS(compare_chains(one, c), Error);
    }
}

TEST_CASE("independent chains on a small fixture look converged") {
    auto c = fixtures::random_tree(8, 3);
    auto m = build_swap_matrix(c);
    std::vector<ChainRun> runs;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        auto p = plan(60000, 2000, s);
        // KS resampling assumes independent draws
        p.thin = 50;
        runs.push_back(run_chain(c, m, p));
    }
    KSOptions o;
    o.reps = 200;
    auto rep = compare_chains(runs, c, {}, o);
    CHECK(rep.rows.size() == 3 * runs[0].fields.size());
    CHECK(rep.approximately_uniform);
}

TEST_CASE("unequal burn-in on a slow chain is flagged") {
    SynthSpec spec;
    spec.fields = {{"T", std::nullopt, 0}};
    for (int i = 0; i < 4; ++i) spec.fields.push_back({"L" + std::to_string(i), 0, 120, 0.5, 0.9});
    spec.seed = 2;
    auto c = generate_corpus(spec);
    auto m = build_swap_matrix(c);
    std::vector<ChainRun> runs{run_chain(c, m, plan(3000, 0, 1)), run_chain(c, m, plan(3000, 2500, 2)),
                               run_chain(c, m, plan(3000, 0, 3))};
    KSOptions o;
    o.reps = 200;
    auto rep = compare_chains(runs, c, {}, o);
    CHECK_FALSE(rep.approximately_uniform);
    std::size_t low = 0;
    for (const auto& r : rep.rows)
        if (r.chain_b == 1 || r.chain_a == 1) low += r.p_value < 0.01;
    CHECK(low >= 8);
}

TEST_CASE("batch-means standard error of iid draws") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0, 2);
    std::vector<double> x(40000);
    for (auto& v : x) v = z(rng);
    CHECK(batch_means_se(x, 40) == doctest::Approx(2.0 / 200).epsilon(0.3));
    CHECK_THROWS_AS(batch_means_se(std::vector<double>{1.0}), Error);
}
