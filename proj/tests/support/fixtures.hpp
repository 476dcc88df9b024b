#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "homophily/corpus.hpp"
#include "homophily/flow.hpp"

namespace fixtures {

using homophily::Corpus;
using homophily::CorpusBuilder;
using homophily::Gender;
using homophily::Index;

inline constexpr Gender F = Gender::Female;
inline constexpr Gender M = Gender::Male;
inline constexpr Gender U = Gender::Unassigned;

inline std::filesystem::path data_dir() { return HOMOPHILY_FIXTURE_DIR; }

/// Two top-level fields drawn in the two-panel compositional example: field A
/// is male-heavy, field B female-heavy, with a sub-threshold cross flow.
inline Corpus two_fields(double cross = 0.03) {
    CorpusBuilder b;
    const Index a = b.add_field("A");
    const Index c = b.add_field("B");
    b.add_paper(a, {M, M, F}, 2000, "a1");
    b.add_paper(a, {M, M}, 2000, "a2");
    b.add_paper(a, {M, M, M, M}, 2000, "a3");
    b.add_paper(a, {M, M, M, F}, 2000, "a4");
    b.add_paper(c, {F, F}, 2000, "b1");
    b.add_paper(c, {F, F}, 2000, "b2");
    b.add_paper(c, {F, F}, 2000, "b3");
    b.add_paper(c, {M, F, F}, 2000, "b4");
    b.add_flow(a, a, 1.0 - cross);
    b.add_flow(a, c, cross);
    b.add_flow(c, c, 1.0 - cross);
    b.add_flow(c, a, cross);
    return b.build();
}

/// Six authorships over two linked fields: A holds {M,F},{F,F}; B holds {M,M}.
inline Corpus tiny_linked() {
    CorpusBuilder b;
    const Index a = b.add_field("A");
    const Index c = b.add_field("B");
    b.add_paper(a, {M, F});
    b.add_paper(a, {F, F});
    b.add_paper(c, {M, M});
    b.add_flow(a, a, 0.8);
    b.add_flow(a, c, 0.2);
    b.add_flow(c, c, 0.7);
    b.add_flow(c, a, 0.3);
    return b.build();
}

/// Three-level tree: T1 -> {C1 -> {L1, L2}, L3}, T2 -> {L4}; random papers.
inline Corpus random_tree(std::uint64_t seed, int papers_per_leaf = 6) {
    std::mt19937_64 rng(seed);
    CorpusBuilder b;
    const Index t1 = b.add_field("T1");
    const Index t2 = b.add_field("T2");
    const Index c1 = b.add_field("C1", t1);
    std::vector<Index> leaves{b.add_field("L1", c1), b.add_field("L2", c1), b.add_field("L3", t1),
                              b.add_field("L4", t2)};
    std::uniform_int_distribution<int> size(2, 5);
    std::bernoulli_distribution male(0.6);
    for (Index leaf : leaves) {
        for (int p = 0; p < papers_per_leaf; ++p) {
            std::vector<Gender> g(static_cast<std::size_t>(size(rng)));
            for (auto& x : g) x = male(rng) ? M : F;
            b.add_paper(leaf, g);
        }
    }
    b.add_flow(leaves[0], leaves[0], 0.8);
    b.add_flow(leaves[0], leaves[1], 0.2);
    b.add_flow(leaves[1], leaves[1], 0.9);
    b.add_flow(leaves[1], leaves[0], 0.1);
    b.add_flow(leaves[2], leaves[2], 1.0);
    b.add_flow(leaves[3], leaves[3], 0.85);
    b.add_flow(leaves[3], leaves[2], 0.15);
    return b.build();
}

}  // namespace fixtures
