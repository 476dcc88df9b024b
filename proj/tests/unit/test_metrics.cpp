#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/metrics.hpp"

using namespace homophily;
using fixtures::F;
using fixtures::M;

namespace {

std::vector<PaperGenders> field_a() { return {{M, M, F}, {M, M}, {M, M, M, M}, {M, M, M, F}}; }
std::vector<PaperGenders> field_b() { return {{F, F}, {F, F}, {F, F}, {M, F, F}}; }

// Inbreeding coefficient from genotype counts: 1 - observed / expected heterozygosity.
double wright_f(const std::vector<PaperGenders>& pairs) {
    double het = 0, females = 0;
    for (const auto& p : pairs) {
        het += p[0] != p[1];
        females += (p[0] == F) + (p[1] == F);
    }
    const double n = double(pairs.size());
    const double pi = females / (2 * n);
    return 1.0 - (het / n) / (2 * pi * (1 - pi));
}

}  // namespace

TEST_CASE("two-field compositional example in exact arithmetic") {
    auto a = compute_alpha_exact(field_a());
    CHECK(a.p == Rational(9, 11));
    CHECK(a.q == Rational(1));
    CHECK(a.alpha == Rational(-2, 11));
    CHECK(a.n_male == 11);
    CHECK(a.n_female == 2);

    auto b = compute_alpha_exact(field_b());
    CHECK(b.p == Rational(0));
    CHECK(b.q == Rational(1, 8));
    CHECK(b.alpha == Rational(-1, 8));

    auto both = field_a();
    for (auto& p : field_b()) both.push_back(p);
    auto pooled = compute_alpha_exact(both);
    CHECK(pooled.p == Rational(3, 4));
    CHECK(pooled.q == Rational(3, 10));
    CHECK(pooled.alpha == Rational(9, 20));
}

TEST_CASE("float mode agrees to 1e-12 and through the corpus") {
    auto corpus = fixtures::two_fields();
    CHECK(std::abs(compute_alpha(corpus, corpus.field_index("A")).alpha + 2.0 / 11) < 1e-12);
    CHECK(std::abs(compute_alpha(corpus, corpus.field_index("B")).alpha + 1.0 / 8) < 1e-12);
    CHECK(std::abs(compute_alpha(corpus, Corpus::root()).alpha - 9.0 / 20) < 1e-12);
    auto sums = mixing_sums(papers_of_field(corpus, Corpus::root()));
    CHECK(std::abs(*sums.alpha() - 9.0 / 20) < 1e-12);
}

TEST_CASE("undefined alpha and contract errors") {
    std::vector<PaperGenders> males{{M, M}, {M, M, M}};
    auto r = compute_alpha(males);
    CHECK_FALSE(r.defined);
    CHECK(r.n_female == 0);
    CHECK_FALSE(mixing_sums(males).alpha().has_value());
    CHECK(to_json(r)["alpha"].is_null());
    std::vector<PaperGenders> solo{{M, F}, {F}};
    CHECK_THROWS_AS(compute_alpha(solo), Error);
    std::vector<PaperGenders> unassigned{{M, Gender::Unassigned}};
    CHECK_THROWS_AS(compute_alpha(unassigned), Error);
}

TEST_CASE("property: two-author corpora match the inbreeding coefficient") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        std::uniform_int_distribution<int> n(2, 30);
        std::bernoulli_distribution male(std::uniform_real_distribution<double>(0.1, 0.9)(rng));
        std::vector<PaperGenders> pairs(static_cast<std::size_t>(n(rng)));
        for (auto& p : pairs) p = {male(rng) ? M : F, male(rng) ? M : F};
        auto r = compute_alpha(pairs);
        if (!r.defined) continue;
        CHECK(std::abs(r.alpha - wright_f(pairs)) < 1e-12);
    }
}

TEST_CASE("property: alpha ignores author order and paper order") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PaperGenders> papers(6);
        for (auto& p : papers) {
            p.resize(std::uniform_int_distribution<std::size_t>(2, 5)(rng));
            for (auto& g : p) g = (rng() & 1) ? M : F;
        }
        auto base = compute_alpha_exact(papers);
        for (auto& p : papers) std::shuffle(p.begin(), p.end(), rng);
        std::shuffle(papers.begin(), papers.end(), rng);
        auto moved = compute_alpha_exact(papers);
        CHECK(moved.defined == base.defined);
        CHECK(moved.alpha == base.alpha);
        if (base.defined) {
            CHECK(base.alpha <= Rational(1));
            CHECK(base.alpha >= Rational(-1));
        }
    }
}

TEST_CASE("FM/MM/FF decomposition") {
    auto d = fm_decomposition(0.0, 0.5);
    CHECK(d.fm == doctest::Approx(50));
    CHECK(d.mm == doctest::Approx(25));
    CHECK(d.ff == doctest::Approx(25));
    auto h = fm_decomposition(1.0, 0.3);
    CHECK(h.fm == doctest::Approx(0).epsilon(1e-12));
    CHECK(h.mm == doctest::Approx(70));
    CHECK(h.ff == doctest::Approx(30));
    CHECK_THROWS_AS(fm_decomposition(-3.0, 0.5), Error);
    CHECK_THROWS_AS(fm_decomposition(0.1, 1.0), Error);
    CHECK_THROWS_AS(fm_decomposition(1.5, 0.5), Error);

    SUBCASE("sums to 100 exactly in rational mode") {
        std::mt19937_64 rng(5);
        for (int i = 0; i < 10000; ++i) {
            Rational pi(std::int64_t(1 + rng() % 999), 1000);
            Rational lo = Rational(1) - Rational(1) / std::max(pi, Rational(1) - pi);
            Rational alpha = lo + (Rational(1) - lo) * Rational(std::int64_t(rng() % 1001), 1000);
            auto e = fm_decomposition_exact(alpha, pi);
            CHECK(e.fm + e.mm + e.ff == Rational(100));
        }
    }

    SUBCASE("back-solved female share reproduces the target pair") {
        // FM = 200 (1 - a) pi (1 - pi), solved for the smaller root.
        const double prod = 41.1 / (200 * (1 - 0.05));
        const double pi = (1 - std::sqrt(1 - 4 * prod)) / 2;
        CHECK(pi == doctest::Approx(0.31647).epsilon(1e-4));
        CHECK(std::abs(fm_decomposition(0.05, pi).fm - 41.1) < 1e-9);
        CHECK(std::abs(fm_decomposition(0.11, pi).fm - 38.6) <= 0.2);
    }
}

TEST_CASE("alpha bounds for two-author papers") {
    CHECK(alpha_bounds(0.5).first == doctest::Approx(-1));
    CHECK(alpha_bounds(0.25).first == doctest::Approx(-2.0 / 3));
    CHECK(alpha_bounds(1e-9).first == doctest::Approx(-0.5));
    CHECK(alpha_bounds(0.3).second == 1.0);
    CHECK_THROWS_AS(alpha_bounds(0.0), Error);
    CHECK_THROWS_AS(alpha_bounds(0.6), Error);
}
