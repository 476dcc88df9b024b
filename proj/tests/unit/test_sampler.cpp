#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/sampler.hpp"

using namespace homophily;

namespace {

ChainPlan small_plan(std::uint64_t seed = 1, std::size_t iterations = 2000, std::size_t burn_in = 500) {
    ChainPlan p;
    p.iterations = iterations;
    p.burn_in = burn_in;
    p.seed = seed;
    return p;
}

bool same_traces(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) != std::isnan(b[i])) return false;
        if (!std::isnan(a[i]) && a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("slot layout and observed configuration") {
    auto c = fixtures::two_fields();
    SlotLayout layout(c);
    Configuration x(c, layout);
    CHECK(layout.slot_count() == 22);
    CHECK(layout.terminal_count() == 2);
    CHECK(x.terminal_sums(0).alpha().value() == doctest::Approx(-2.0 / 11).epsilon(1e-14));
    CHECK(x.field_sums(c, Corpus::root()).alpha().value() == doctest::Approx(9.0 / 20).epsilon(1e-14));
    CHECK_NOTHROW(x.verify(c));
}

TEST_CASE("acceptance ratios on hand-checked cycles") {
    auto c = fixtures::tiny_linked();
    auto m = build_swap_matrix(c);
    SlotLayout layout(c);
    Configuration x(c, layout);

    // Authorships 0..3 sit in field A, 4..5 in field B.
    CHECK(acceptance_ratio(x, {{0, 3}}, m) == 1.0);
    CHECK(acceptance_ratio(x, {{0, 0}}, m) == 0.0);
    CHECK(acceptance_ratio(x, {{0, 1, 0}}, m) == 0.0);
    const double cross = acceptance_ratio(x, {{0, 4}}, m);
    CHECK(cross == doctest::Approx(0.0625 / 0.56).epsilon(1e-12));

    SUBCASE("unsupported pair has zero density") {
        auto iso = fixtures::two_fields();
        auto mi = build_swap_matrix(iso);
        SlotLayout li(iso);
        Configuration xi(iso, li);
        CHECK(acceptance_ratio(xi, {{0, 20}}, mi) == 0.0);
    }
}

TEST_CASE("applying a cycle and its reverse restores the configuration") {
    auto c = fixtures::random_tree(4);
    SlotLayout layout(c);
    Configuration x(c, layout);
    const auto before = x.assignment();
    std::vector<Index> cyc{0, 7, 30, 12};
    x.apply_cycle(cyc);
    CHECK(x.assignment() != before);
    CHECK_NOTHROW(x.verify(c));
    std::vector<Index> rev(cyc.rbegin(), cyc.rend());
    x.apply_cycle(rev);
    CHECK(x.assignment() == before);
}

TEST_CASE("candidate sets follow the current assignment") {
    auto c = fixtures::tiny_linked();
    auto m = build_swap_matrix(c);
    SlotLayout layout(c);
    Configuration x(c, layout);
    CandidateIndex idx(m, layout.terminal_begin());
    CHECK(candidate_set(x, idx, 0) == std::vector<Index>{0, 1, 2, 3, 4, 5});

    auto iso = fixtures::two_fields();
    auto mi = build_swap_matrix(iso);
    SlotLayout li(iso);
    Configuration xi(iso, li);
    CandidateIndex ii(mi, li.terminal_begin());
    CHECK(candidate_set(xi, ii, 1).size() == 9);
    CHECK_THROWS_AS(candidate_set(xi, ii, 2), Error);

    // Two fields linked to a third but not to each other: after a move through
    // the middle field, the moved authorship belongs to a different candidate set.
    CorpusBuilder b;
    auto f0 = b.add_field("P");
    auto f1 = b.add_field("Q");
    auto f2 = b.add_field("R");
    b.add_paper(f0, {fixtures::M, fixtures::M});
    b.add_paper(f1, {fixtures::F, fixtures::F});
    b.add_paper(f2, {fixtures::M, fixtures::F});
    b.add_flow(f0, f0, 0.8);
    b.add_flow(f0, f1, 0.2);
    b.add_flow(f2, f2, 0.8);
    b.add_flow(f2, f1, 0.2);
    auto chain = b.build();
    auto mc = build_swap_matrix(chain);
    SlotLayout lc(chain);
    Configuration xc(chain, lc);
    CandidateIndex ic(mc, lc.terminal_begin());
    CHECK(candidate_set(xc, ic, 0) == std::vector<Index>{0, 1, 2, 3});
    xc.apply_cycle(std::vector<Index>{0, 2});  // authorship 0 moves to Q, 2 moves to P
    CHECK(candidate_set(xc, ic, 0) == std::vector<Index>{0, 1, 2, 3});
    CHECK(candidate_set(xc, ic, 2) == std::vector<Index>{0, 3, 4, 5});
}

TEST_CASE("proposal probabilities are symmetric") {
    auto c = fixtures::random_tree(9, 3);
    auto m = build_swap_matrix(c);
    SlotLayout layout(c);
    Configuration x(c, layout);
    CandidateIndex idx(m, layout.terminal_begin());
    std::vector<Index> pool(c.authorships().size());
    for (Index a = 0; a < pool.size(); ++a) pool[a] = a;
    Rng rng(42);
    int checked = 0;
    for (int i = 0; i < 5000 && checked < 300; ++i) {
        auto prop = propose_cycle(x, idx, pool, rng, 0.5);
        if (acceptance_ratio(x, prop, m) == 0.0) continue;
        const double fwd = proposal_probability(x, m, idx, prop.authorships, pool.size(), 0.5);
        Configuration y = x;
        y.apply_cycle(prop.authorships);
        std::vector<Index> rev(prop.authorships.rbegin(), prop.authorships.rend());
        const double back = proposal_probability(y, m, idx, rev, pool.size(), 0.5);
        CHECK(fwd > 0);
        CHECK(std::abs(fwd - back) <= 1e-12 * fwd);
        ++checked;
        if (rng.uniform() < 0.3) x = y;
    }
    CHECK(checked >= 100);
}

TEST_CASE("chains conserve the equivalence-class constraints") {
    auto c = fixtures::random_tree(5);
    auto m = build_swap_matrix(c);
    auto plan = small_plan(3, 3000, 100);
    plan.check_invariants = true;
    plan.proposals_per_iteration = 4;
    ChainRun run;
    CHECK_NOTHROW(run = run_chain(c, m, plan));
    CHECK(run.counters.accepted > 0);
    CHECK(run.traces.front().size() == 2900);
    CHECK(run.counters.mean_origin_retention() > 0.5);
    CHECK(run.counters.mean_origin_retention() <= 1.0);
}

TEST_CASE("within-field support keeps per-field gender counts") {
    auto c = fixtures::two_fields();
    auto m = build_swap_matrix(c);
    ChainSampler s(c, m, small_plan(8, 500, 0));
    std::size_t checks = 0;
    s.set_observer([&](std::size_t, const Configuration& x) {
        CHECK(x.terminal_sums(0).n_male == 11);
        CHECK(x.terminal_sums(0).n_female == 2);
        CHECK(x.terminal_sums(1).n_male == 1);
        ++checks;
    });
    s.advance(500);
    CHECK(checks == 500);
}

TEST_CASE("level consistency between incremental sums and the literal formula") {
    auto c = fixtures::random_tree(12);
    auto m = build_swap_matrix(c);
    ChainSampler s(c, m, small_plan(2, 300, 0));
    s.set_observer([&](std::size_t, const Configuration& x) {
        for (Index f = 0; f < c.fields().size(); ++f) {
            auto lit = compute_alpha(x.field_papers(c, f));
            auto inc = x.field_sums(c, f).alpha();
            REQUIRE(lit.defined == inc.has_value());
            if (lit.defined) CHECK(std::abs(lit.alpha - *inc) < 1e-12);
        }
    });
    s.advance(300);
}

TEST_CASE("chains are deterministic across threads and checkpoints") {
    auto c = fixtures::random_tree(21);
    auto m = build_swap_matrix(c);
    auto plan = small_plan(77, 1500, 300);
    auto first = run_chain(c, m, plan);
    auto second = run_chain(c, m, plan);
    for (std::size_t k = 0; k < first.fields.size(); ++k) CHECK(same_traces(first.traces[k], second.traces[k]));

    plan.threads = 3;
    auto threaded = run_chain(c, m, plan);
    for (std::size_t k = 0; k < first.fields.size(); ++k) CHECK(same_traces(first.traces[k], threaded.traces[k]));
    plan.threads = 1;

    ChainSampler part(c, m, plan);
    part.advance(400);
    const auto blob = part.checkpoint();
    auto head = part.finish();
    auto resumed = ChainSampler::restore(c, m, plan, blob);
    CHECK(resumed.completed() == 400);
    resumed.advance(1100);
    auto tail = resumed.finish();
    for (std::size_t k = 0; k < first.fields.size(); ++k) {
        auto joined = head.traces[k];
        joined.insert(joined.end(), tail.traces[k].begin(), tail.traces[k].end());
        CHECK(same_traces(joined, first.traces[k]));
    }
    CHECK(tail.counters.accepted == first.counters.accepted);

    auto other = plan;
    other.seed = 78;
    CHECK_THROWS_AS(ChainSampler::restore(c, m, other, blob), Error);
    CHECK_THROWS_AS(ChainSampler::restore(c, m, plan, "garbage"), Error);
}

TEST_CASE("plan validation") {
    auto c = fixtures::two_fields();
    auto m = build_swap_matrix(c);
    CHECK_THROWS_AS(run_chain(c, m, small_plan(1, 100, 100)), Error);
    auto p = small_plan();
    p.tracked_fields = {99};
    CHECK_THROWS_AS(run_chain(c, m, p), Error);
    p = small_plan();
    p.continue_prob = 1.0;
    CHECK_THROWS_AS(run_chain(c, m, p), Error);
    CHECK_THROWS_AS(parse_cycle_length_mode("sideways"), Error);
    CHECK(ChainPlan::from_json(small_plan(5).to_json()).seed == 5);
}

TEST_CASE("trace export round-trips") {
    auto c = fixtures::two_fields(0.2);
    auto m = build_swap_matrix(c);
    auto run = run_chain(c, m, small_plan(4, 300, 100));
    std::stringstream bin;
    write_trace_binary(run, c, bin);
    auto back = read_trace_binary(bin, c);
    CHECK(back.fields == run.fields);
    for (std::size_t k = 0; k < run.fields.size(); ++k) CHECK(same_traces(back.traces[k], run.traces[k]));
    CHECK(back.counters.accepted == run.counters.accepted);

    std::stringstream csv;
    write_trace_csv(run, c, csv);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "sample_index,field_id,alpha");
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    CHECK(lines == 200 * run.fields.size());
}

TEST_CASE("clamped cycle-length mode") {
    auto c = fixtures::tiny_linked();
    auto m = build_swap_matrix(c);
    auto plan = small_plan(6, 1000, 0);
    plan.length_mode = CycleLengthMode::ClampedGeometric;
    plan.check_invariants = true;
    CHECK_NOTHROW(run_chain(c, m, plan));
}

TEST_CASE("thinning keeps every k-th post-burn-in sample") {
    auto c = fixtures::random_tree(6);
    auto m = build_swap_matrix(c);
    ChainPlan p;
    p.iterations = 1000;
    p.burn_in = 95;
    p.seed = 3;
    auto full = run_chain(c, m, p);
    p.thin = 7;
    auto thinned = run_chain(c, m, p);
    CHECK(thinned.traces[0].size() == p.samples());
    CHECK(p.samples() == (905 + 6) / 7);
    for (std::size_t k = 0; k < thinned.fields.size(); ++k)
        for (std::size_t i = 0; i < thinned.traces[k].size(); ++i) {
            const double a = thinned.traces[k][i], b = full.traces[k][i * 7];
            CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
        }
    p.thin = 0;
    CHECK_THROWS_AS(p.validate(c), Error);
}
