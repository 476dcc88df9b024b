#include <cmath>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/validation.hpp"

using namespace homophily;
using fixtures::F;
using fixtures::M;

namespace {

double total_probability(const std::vector<AlphaAtom>& d) {
    double s = 0;
    for (const auto& a : d) s += a.probability;
    return s;
}

SynthSpec one_field(std::uint64_t seed, double strength = 0.0) {
    SynthSpec s;
    s.fields.push_back({"X", std::nullopt, 6, 0.5, std::nullopt, 6, 6, 0});
    s.size_weights = {1.0};
    s.homophily = strength;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("exact within-field null of the compositional example") {
    auto c = fixtures::two_fields();
    auto m = build_swap_matrix(c);
    auto exact = enumerate_null_exact(c, m);
    const Index a = c.field_index("A"), b = c.field_index("B");
    CHECK(exact.expected_alpha(a) == doctest::Approx(-1.0 / 12).epsilon(1e-12));
    CHECK(exact.expected_alpha(b) == doctest::Approx(-1.0 / 8).epsilon(1e-12));
    CHECK(std::round(exact.expected_alpha(a) * 100) / 100 == doctest::Approx(-0.08));
    CHECK(std::round(exact.expected_alpha(b) * 100) / 100 == doctest::Approx(-0.13));
    for (const auto& d : exact.distributions) CHECK(std::abs(total_probability(d) - 1) < 1e-12);
    // Keeping each field's composition already explains the pooled value.
    CHECK(exact.expected_alpha(Corpus::root()) > 9.0 / 20);
    CHECK(exact.p_value(Corpus::root(), 9.0 / 20) == doctest::Approx(1.0));
    auto j = exact.to_json(c);
    CHECK(j["fields"].size() == 3);
}

TEST_CASE("merging both fields into one pool puts the pooled value in the tail") {
    auto two = fixtures::two_fields();
    CorpusBuilder b;
    auto x = b.add_field("X");
    for (Index p = 0; p < two.papers().size(); ++p) b.add_paper(x, papers_of_field(two, Corpus::root())[p]);
    auto c = b.build();
    auto exact = enumerate_null_exact(c, build_swap_matrix(c));
    CHECK(exact.expected_alpha(x) < 9.0 / 20);
    CHECK(exact.p_value(x, 9.0 / 20) < 0.05);
}

TEST_CASE("uniform within-field count agrees with weighted enumeration") {
    CorpusBuilder b;
    auto x = b.add_field("X");
    b.add_paper(x, {F, F});
    b.add_paper(x, {M, M});
    auto c = b.build();
    auto exact = enumerate_null_exact(c, build_swap_matrix(c));
    // 4!/(2!2!) = 6 splits of 2F2M into two pairs: 2 homogeneous (alpha 1), 4 mixed (alpha -1).
    auto d = exact.distribution(x);
    REQUIRE(d.size() == 2);
    CHECK(*d[0].alpha == Rational(-1));
    CHECK(d[0].probability == doctest::Approx(4.0 / 6));
    CHECK(*d[1].alpha == Rational(1));
    CHECK(exact.expected_alpha(x) == doctest::Approx(-1.0 / 3));
}

TEST_CASE("collapsed and full enumerations agree") {
    auto c = fixtures::tiny_linked();
    auto m = build_swap_matrix(c);
    auto exact = enumerate_null_exact(c, m);
    auto configs = enumerate_configurations(c, m);
    CHECK(configs.size() == 90);
    double sum = 0;
    std::map<Index, std::map<double, double>> from_full;
    for (const auto& cfg : configs) {
        sum += cfg.probability;
        std::vector<PaperGenders> papers(c.papers().size());
        for (Index a = 0; a < cfg.paper_of.size(); ++a) papers[cfg.paper_of[a]].push_back(c.authorships()[a].gender);
        for (Index f : exact.fields) {
            std::vector<PaperGenders> sub;
            for (Index p : c.papers_under(f)) sub.push_back(papers[p]);
            auto r = compute_alpha(sub);
            from_full[f][r.defined ? std::round(r.alpha * 1e9) / 1e9 : 99.0] += cfg.probability;
        }
    }
    CHECK(std::abs(sum - 1) < 1e-12);
    for (Index f : exact.fields) {
        for (const auto& atom : exact.distribution(f)) {
            const double key =
                atom.alpha ? std::round(double(atom.alpha->numerator()) / double(atom.alpha->denominator()) * 1e9) / 1e9
                           : 99.0;
            CHECK(from_full[f][key] == doctest::Approx(atom.probability).epsilon(1e-12));
        }
    }
}

TEST_CASE("gender labels are exchangeable in the enumeration") {
    auto c = fixtures::random_tree(31, 2);
    std::vector<Gender> flipped;
    for (const auto& a : c.authorships()) flipped.push_back(a.gender == M ? F : M);
    auto d = c.with_genders(flipped);
    auto m = build_swap_matrix(c);
    auto e1 = enumerate_null_exact(c, m);
    auto e2 = enumerate_null_exact(d, m);
    for (Index f : e1.fields) {
        const auto& a = e1.distribution(f);
        const auto& b = e2.distribution(f);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].alpha == b[i].alpha);
            CHECK(a[i].probability == doctest::Approx(b[i].probability).epsilon(1e-10));
        }
    }
}

TEST_CASE("enumeration cap") {
    auto c = fixtures::random_tree(2, 6);
    CHECK_THROWS_WITH_AS(enumerate_null_exact(c, build_swap_matrix(c), 1000), "instance too large for exact oracle",
                         Error);
    CHECK_THROWS_AS(enumerate_configurations(fixtures::two_fields(), build_swap_matrix(fixtures::two_fields()), 10), Error);
}

TEST_CASE("synthetic corpora") {
    SynthSpec spec;
    spec.fields = {{"T", std::nullopt, 0}, {"L1", 0, 40, 0.3}, {"L2", 0, 40, 0.7}};
    spec.cross_flow = 0.2;
    spec.seed = 9;
    auto c = generate_corpus(spec);
    CHECK(c.papers().size() == 80);
    CHECK(generate_corpus(spec) == c);
    CHECK(clean_corpus(c).corpus == c);
    auto m = build_swap_matrix(c);
    CHECK(m(0, 1) > 0);

    spec.seed = 10;
    CHECK_FALSE(generate_corpus(spec) == c);

    SUBCASE("strength one gives single-gender papers") {
        auto s = one_field(4, 1.0);
        auto h = generate_corpus(s);
        CHECK(compute_alpha(h, h.field_index("X")).alpha == doctest::Approx(1.0));
    }
    SUBCASE("infeasible pools are rejected") {
        auto s = one_field(4);
        s.fields[0].males = 2;
        CHECK_THROWS_AS(generate_corpus(s), Error);
        auto bad = one_field(4);
        bad.homophily = 1.5;
        CHECK_THROWS_AS(generate_corpus(bad), Error);
    }
    SUBCASE("solo papers and missing genders") {
        auto s = spec;
        s.fields[1].solo_papers = 10;
        s.missing_rate = 0.2;
        auto g = generate_corpus(s);
        CHECK(g.papers().size() == 90);
        CHECK(g.count_gender(Gender::Unassigned) > 0);
    }
}

TEST_CASE("null synthetic draws follow the exact null") {
    auto first = generate_corpus(one_field(1));
    auto exact = enumerate_null_exact(first, build_swap_matrix(first));
    const Index x = first.field_index("X");
    std::map<double, double> freq;
    const int draws = 4000;
    for (int s = 0; s < draws; ++s) {
        auto c = generate_corpus(one_field(1000 + std::uint64_t(s)));
        freq[std::round(compute_alpha(c, x).alpha * 1e9) / 1e9] += 1.0 / draws;
    }
    double tv = 0;
    for (const auto& atom : exact.distribution(x)) {
        const double key = std::round(double(atom.alpha->numerator()) / double(atom.alpha->denominator()) * 1e9) / 1e9;
        tv += std::abs(freq[key] - atom.probability);
        freq.erase(key);
    }
    for (const auto& [k, v] : freq) tv += v;
    CHECK(tv / 2 < 0.04);
}

TEST_CASE("pooling opposite-ratio fields raises alpha") {
    double pooled = 0, per_field = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        SynthSpec s;
        s.fields = {{"A", std::nullopt, 30, 0.2}, {"B", std::nullopt, 30, 0.8}};
        s.seed = seed;
        auto c = generate_corpus(s);
        pooled += compute_alpha(c, Corpus::root()).alpha;
        per_field += (compute_alpha(c, c.field_index("A")).alpha + compute_alpha(c, c.field_index("B")).alpha) / 2;
    }
    CHECK(pooled > per_field);
}
