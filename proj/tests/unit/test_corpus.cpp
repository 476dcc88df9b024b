#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/corpus.hpp"
#include "homophily/error.hpp"
#include "homophily/gender.hpp"

using namespace homophily;
using fixtures::F;
using fixtures::M;
using fixtures::U;

namespace {

IngestResult ingest_strings(const std::string& papers, const std::string& auths, const std::string& hier,
                            const std::string& flows = "", IngestConfig cfg = {}) {
    std::istringstream p(papers), a(auths), h(hier), f(flows);
    return ingest_corpus(p, a, h, flows.empty() ? nullptr : &f, cfg);
}

const std::string kHier = "field_id\tparent_id\tlevel\nT\tNULL\t1\nX\tT\t2\nY\tT\t2\n";

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("ingest a small corpus") {
    auto r = ingest_strings("p1\tX\t2000\np2\tY\t2001\n", "a1\tp1\tanna\na2\tp1\tbob\na3\tp2\tc\na4\tp2\td\na5\tp2\te\n",
                            kHier);
    CHECK(r.corpus.papers().size() == 2);
    CHECK(r.corpus.authorships().size() == 5);
    CHECK(r.corpus.fields().size() == 4);
    CHECK(r.report.papers_kept == 2);
    CHECK(r.corpus.level_tag(r.corpus.field_index("T")) == LevelTag::Top);
    CHECK(r.corpus.level_tag(r.corpus.field_index("X")) == LevelTag::Terminal);
    CHECK(r.corpus.level_tag(Corpus::root()) == LevelTag::Root);
}

TEST_CASE("ingest errors name the offending row") {
    auto msg = error_of([] { ingest_strings("p1\tZ\t2000\n", "", kHier); });
    CHECK(msg.find("unknown field") != std::string::npos);
    CHECK(msg.find("papers:1") != std::string::npos);

    msg = error_of([] { ingest_strings("p1\tT\t2000\n", "", kHier); });
    CHECK(msg.find("not a terminal field") != std::string::npos);

    msg = error_of([] { ingest_strings("paper_id\tterminal_field_id\tyear\np1\tX\tabc\n", "", kHier); });
    CHECK(msg.find("papers:2") != std::string::npos);
    CHECK(msg.find("malformed year") != std::string::npos);

    msg = error_of([] { ingest_strings("p1\tX\t2000\n", "a1\tp9\tx\n", kHier); });
    CHECK(msg.find("unknown paper") != std::string::npos);

    msg = error_of([] { ingest_strings("", "", "X\tQ\t2\n"); });
    CHECK(msg.find("unknown parent") != std::string::npos);
}

TEST_CASE("papers outside the year window are excluded and logged") {
    auto r = ingest_strings("p1\tX\t1959\np2\tX\t1960\np3\tX\t2011\np4\tX\t2012\n",
                            "a1\tp1\tx\na2\tp2\ty\na3\tp2\tz\n", kHier);
    CHECK(r.corpus.papers().size() == 2);
    CHECK(r.report.papers_out_of_window == 2);
    CHECK(r.report.excluded_paper_ids == std::vector<std::string>{"p1", "p4"});
    CHECK(r.report.authorships_of_excluded_papers == 1);
}

TEST_CASE("fixture files ingest to the expected corpus") {
    const auto dir = fixtures::data_dir() / "two_fields";
    auto r = ingest_corpus(CorpusFiles{dir / "papers.tsv", dir / "authorships.tsv", dir / "hierarchy.tsv",
                                       dir / "flows.tsv"});
    const auto expected = fixtures::two_fields();
    CHECK(r.corpus.fields() == expected.fields());
    CHECK(r.corpus.papers() == expected.papers());
    CHECK(r.corpus.authorships() == expected.authorships());
    REQUIRE(r.corpus.flows().size() == expected.flows().size());
    for (std::size_t i = 0; i < expected.flows().size(); ++i)
        CHECK(r.corpus.flows()[i].proportion == doctest::Approx(expected.flows()[i].proportion));
    CHECK(r.report.authorships_with_direct_gender == 22);
}

TEST_CASE("write then load round-trips") {
    auto c = fixtures::random_tree(7);
    auto dir = std::filesystem::temp_directory_path() / "homophily_roundtrip";
    std::filesystem::remove_all(dir);
    write_corpus(c, dir);
    auto back = load_corpus(dir);
    CHECK(back == c);
    write_corpus(back, dir);
    CHECK(load_corpus(dir) == c);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cleaning drops Unassigned authorships and short papers") {
    CorpusBuilder b;
    auto x = b.add_field("X");
    b.add_paper(x, {F, F, M, U, U});
    b.add_paper(x, {F, U});
    b.add_paper(x, {M});
    auto raw = b.build();
    auto r = clean_corpus(raw);
    REQUIRE(r.corpus.papers().size() == 1);
    std::vector<Gender> g;
    for (Index a : r.corpus.papers()[0].authorships) g.push_back(r.corpus.authorships()[a].gender);
    CHECK(g == std::vector<Gender>{F, F, M});
    CHECK(r.stats.solo_papers_removed == 1);
    CHECK(r.stats.total.unassigned == 3);
    CHECK(r.stats.total.papers_before == 2);
    CHECK(r.stats.total.papers_remaining == 1);
    CHECK(r.corpus.provenance().cleaned);

    SUBCASE("idempotent") {
        auto again = clean_corpus(r.corpus);
        CHECK(again.corpus == r.corpus);
    }
    SUBCASE("identity on complete data") {
        auto full = fixtures::two_fields();
        CHECK(clean_corpus(full).corpus == full);
    }
    SUBCASE("empty result is flagged") {
        CorpusBuilder e;
        auto y = e.add_field("Y");
        e.add_paper(y, {F, U});
        auto out = clean_corpus(e.build());
        CHECK(out.corpus.papers().empty());
        CHECK(out.stats.empty_result);
    }
}

TEST_CASE("name normalization") {
    CHECK(normalize_name("  José-María ") == "jose-maria");
    CHECK(normalize_name("O'Neil") == "oneil");
    CHECK(normalize_name("J.  R.") == "j r");
    CHECK(normalize_name("Ærin") == "aerin");
    CHECK(name_parts("anne-marie louise") == std::vector<std::string>{"anne", "marie", "louise"});
}

TEST_CASE("gender imputation rule") {
    NameFrequencyTable primary("primary", 0), fallback("fallback", 1);
    primary.add("Alice", 97, 3);
    primary.add("Robin", 90, 10);
    fallback.add("Robin", 90, 10);
    fallback.add("Bjorn", 1, 99);
    primary.add("Eve", 98, 2);
    primary.add("Max", 0, 100);
    std::vector<const GenderProvider*> both{&primary, &fallback};
    const double thr = 0.95;

    CHECK(resolve_name("alice", both, thr).gender == F);
    CHECK(resolve_name("Robin", both, thr).gender == U);
    auto fb = resolve_name("Bjorn", both, thr);
    CHECK(fb.gender == M);
    CHECK(fb.source == 1);
    CHECK(resolve_name("Zed-Eve", both, thr).gender == F);
    auto conflict = resolve_name("Eve-Max", both, thr);
    CHECK(conflict.gender == U);
    CHECK(conflict.conflict);
    CHECK(resolve_name("Nobody", both, thr).found == false);

    CorpusBuilder b;
    auto x = b.add_field("X");
    b.add_paper(x, {U, U, M});
    auto raw = b.build();
    std::vector<Authorship> auths = raw.authorships();
    auths[0].first_name = "Alice";
    auths[1].first_name = "Bjorn";
    auths[2].first_name = "Alice";
    Corpus named(raw.fields(), raw.papers(), auths, raw.flows());
    std::vector<const GenderProvider*> shuffled{&fallback, &primary};
    auto r = impute_gender(named, shuffled, thr);
    CHECK(r.corpus.authorships()[0].gender == F);
    CHECK(r.corpus.authorships()[1].gender == M);
    CHECK(r.corpus.authorships()[2].gender == M);  // preassigned gender kept
    CHECK(r.report.preassigned == 1);
    REQUIRE(r.report.per_source.size() == 2);
    CHECK(r.report.per_source[0].name == "primary");
    CHECK(r.report.per_source[0].imputed == 1);
    CHECK(r.report.per_source[1].imputed == 1);

    std::vector<const GenderProvider*> none;
    CHECK_THROWS_AS(impute_gender(named, none, thr), Error);
    CHECK_THROWS_AS(impute_gender(named, both, 0.5), Error);
    CHECK_THROWS_AS(impute_gender(named, both, 1.01), Error);
    CHECK_NOTHROW(impute_gender(named, both, 1.0));
}

TEST_CASE("name table loads from TSV and accumulates duplicates") {
    std::istringstream in("name\tfemale_count\tmale_count\nMaria\t10\t0\nmaría\t5\t1\n");
    auto t = NameFrequencyTable::load(in, "t", 0);
    auto c = t.lookup("maria");
    REQUIRE(c);
    CHECK(c->female == 15);
    CHECK(c->male == 1);
}
