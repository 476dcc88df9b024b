#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "homophily/error.hpp"
#include "homophily/flow.hpp"

using namespace homophily;

namespace {

double row_sum(const SwapMatrix& m, Index j) {
    double s = 0;
    for (const auto& e : m.row(j)) s += e.value;
    return s;
}

// Brute-force reachability over positive entries.
std::vector<std::vector<bool>> reachable(const SwapMatrix& m) {
    const auto n = m.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (Index i = 0; i < n; ++i) {
        r[i][i] = true;
        for (Index k = 0; k < n; ++k)
            if (m(i, k) > 0) r[i][k] = true;
    }
    for (Index k = 0; k < n; ++k)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    return r;
}

}  // namespace

TEST_CASE("no thresholding triggered") {
    std::vector<FlowInput> flows{{0, 0, .9}, {0, 1, .1}, {1, 1, .8}, {1, 0, .2}};
    auto m = build_swap_matrix(2, flows);
    CHECK(m.nonzeros() == 4);
    CHECK(m(0, 0) == doctest::Approx(.9 / 1.05));
    CHECK(m(0, 1) == doctest::Approx(.15 / 1.05));
    CHECK(m(1, 1) == doctest::Approx(.8 / .95));
    CHECK(m(1, 0) == doctest::Approx(.15 / .95));
    CHECK(std::abs(row_sum(m, 0) - 1) < 1e-12);
}

TEST_CASE("sub-threshold cross flows split the fields") {
    std::vector<FlowInput> flows{{0, 0, .97}, {0, 1, .03}, {1, 1, .96}, {1, 0, .04}};
    auto m = build_swap_matrix(2, flows);
    CHECK(m(0, 1) == 0.0);
    CHECK(m(1, 0) == 0.0);
    CHECK(m(0, 0) == 1.0);
    CHECK(components(m).count() == 2);
}

TEST_CASE("one-way flow is symmetrized before normalizing") {
    std::vector<FlowInput> flows{{0, 0, .9}, {0, 1, .1}, {1, 1, 1.0}, {1, 0, 0.0}};
    auto m = build_swap_matrix(2, flows);
    // Pre-normalization: AB = BA = .05, AA = .9, BB = 1.
    CHECK(m(0, 1) == doctest::Approx(.05 / .95));
    CHECK(m(1, 0) == doctest::Approx(.05 / 1.05));
    CHECK(m(0, 0) == doctest::Approx(.9 / .95));
    CHECK(m(1, 1) == doctest::Approx(1.0 / 1.05));
}

TEST_CASE("missing self rows receive the residual mass") {
    std::vector<FlowInput> flows{{0, 1, .2}, {1, 0, .2}};
    auto m = build_swap_matrix(2, flows);
    CHECK(m(0, 0) == doctest::Approx(.8));
    CHECK(m(0, 1) == doctest::Approx(.2));
}

TEST_CASE("flow errors") {
    std::vector<FlowInput> bad{{0, 1, -.1}};
    CHECK_THROWS_AS(build_swap_matrix(2, bad), Error);
    std::vector<FlowInput> big{{0, 1, 1.5}};
    CHECK_THROWS_AS(build_swap_matrix(2, big), Error);

    std::vector<FlowInput> dead{{0, 0, .02}, {0, 1, .03}, {1, 1, 1.0}};
    std::vector<std::string> names{"alpha", "beta"};
    try {
        build_swap_matrix(2, dead, 0.05, names);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
        CHECK(std::string(e.what()).find("beta") == std::string::npos);
    }
}

TEST_CASE("corpus flows map to terminal indices") {
    auto m = build_swap_matrix(fixtures::two_fields());
    CHECK(m.size() == 2);
    CHECK(components(m).count() == 2);
    auto linked = build_swap_matrix(fixtures::two_fields(0.2));
    CHECK(components(linked).count() == 1);
}

TEST_CASE("components follow transitive links") {
    std::vector<FlowInput> chain{{0, 1, .3}, {1, 2, .3}, {3, 3, 1.0}};
    auto m = build_swap_matrix(4, chain);
    auto c = components(m);
    CHECK(c.count() == 2);
    CHECK(c.component_of[0] == c.component_of[2]);
    CHECK(c.component_of[3] != c.component_of[0]);

    std::vector<FlowInput> diag{{0, 0, 1}, {1, 1, 1}, {2, 2, 1}};
    CHECK(components(build_swap_matrix(3, diag)).count() == 3);
}

TEST_CASE("property: random flows give symmetric, stochastic, correctly split matrices") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 1 + Index(rng() % 8);
        std::vector<FlowInput> flows;
        for (Index j = 0; j < n; ++j) {
            double left = 1.0;
            for (Index k = 0; k < n; ++k) {
                if (rng() % 3 == 0) continue;
                double v = left * std::uniform_real_distribution<double>(0, 0.6)(rng);
                if (k == j) v = std::max(v, 0.2 * left);
                left -= v;
                flows.push_back({j, k, v});
            }
            bool has_self = false;
            for (const auto& f : flows) has_self |= f.from == j && f.to == j;
            if (!has_self) flows.push_back({j, j, std::max(left, 0.06)});
        }
        SwapMatrix m;
        try {
            m = build_swap_matrix(n, flows);
        } catch (const Error&) {
            continue;
        }
        for (Index j = 0; j < n; ++j) {
            CHECK(std::abs(row_sum(m, j) - 1) < 1e-9);
            for (Index k = 0; k < n; ++k) {
                CHECK((m(j, k) > 0) == (m(k, j) > 0));
                CHECK(m(j, k) >= 0);
            }
        }
        auto c = components(m);
        auto r = reachable(m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) CHECK((c.component_of[i] == c.component_of[j]) == bool(r[i][j]));
    }
}

TEST_CASE("candidate index covers the supported fields' slots") {
    std::vector<FlowInput> flows{{0, 0, .9}, {0, 1, .1}, {1, 1, .9}, {1, 0, .1}, {2, 2, 1}};
    auto m = build_swap_matrix(3, flows);
    std::vector<std::uint32_t> begin{0, 3, 5, 9};
    CandidateIndex idx(m, begin);
    CHECK(idx.size(0) == 5);
    CHECK(idx.size(2) == 4);
    CHECK(idx.slots(0) == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
    CHECK(idx.slots(2) == std::vector<std::uint32_t>{5, 6, 7, 8});
}
