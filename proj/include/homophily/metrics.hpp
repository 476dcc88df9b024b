#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"
#include "homophily/error.hpp"

namespace homophily {

using Rational = boost::rational<std::int64_t>;

/// Bergstrom's alpha for a set of papers. `p` is the mean, over male
/// authorships, of the fraction of their co-authorships that are male; `q`
/// is the same mean over female authorships.
template <class Num>
struct BasicAlphaResult {
    Num p{};
    Num q{};
    Num alpha{};
    std::size_t n_female = 0;
    std::size_t n_male = 0;
    bool defined = false;
};

using AlphaResult = BasicAlphaResult<double>;
using ExactAlphaResult = BasicAlphaResult<Rational>;

/// Gender lists, one per paper.
using PaperGenders = std::vector<Gender>;

namespace detail {

template <class Num>
BasicAlphaResult<Num> alpha_by_authorship(std::span<const PaperGenders> papers) {
    BasicAlphaResult<Num> r;
    Num male_total{}, female_total{};
    for (const auto& paper : papers) {
        if (paper.size() < 2) throw Error("metrics", "alpha needs every paper to have at least two authorships");
        std::int64_t males = 0;
        for (Gender g : paper) {
            if (g == Gender::Unassigned) throw Error("metrics", "alpha is undefined for Unassigned authorships");
            males += g == Gender::Male;
        }
        const auto n = static_cast<std::int64_t>(paper.size());
        for (Gender g : paper) {
            const std::int64_t other_males = males - (g == Gender::Male ? 1 : 0);
            const Num frac = Num(other_males) / Num(n - 1);
            if (g == Gender::Male) {
                male_total += frac;
                ++r.n_male;
            } else {
                female_total += frac;
                ++r.n_female;
            }
        }
    }
    r.defined = r.n_male > 0 && r.n_female > 0;
    if (r.n_male > 0) r.p = male_total / Num(static_cast<std::int64_t>(r.n_male));
    if (r.n_female > 0) r.q = female_total / Num(static_cast<std::int64_t>(r.n_female));
    if (r.defined) r.alpha = r.p - r.q;
    return r;
}

}  // namespace detail

AlphaResult compute_alpha(std::span<const PaperGenders> papers);
ExactAlphaResult compute_alpha_exact(std::span<const PaperGenders> papers);

/// Observed configuration: the papers under `field` as recorded in the corpus.
std::vector<PaperGenders> papers_of_field(const Corpus& corpus, Index field);
AlphaResult compute_alpha(const Corpus& corpus, Index field);

nlohmann::json to_json(const AlphaResult& r);

/// Sufficient statistics for alpha, additive over papers:
///   male_sum   = sum_d m_d (m_d - 1) / (n_d - 1)
///   female_sum = sum_d f_d m_d / (n_d - 1)
/// so that p = male_sum / n_male and q = female_sum / n_female.
struct MixingSums {
    double male_sum = 0.0;
    double female_sum = 0.0;
    std::int64_t n_male = 0;
    std::int64_t n_female = 0;

    void add_paper(std::int64_t females, std::int64_t males);
    MixingSums& operator+=(const MixingSums& o);
    bool defined() const noexcept { return n_male > 0 && n_female > 0; }
    std::optional<double> alpha() const;
};

MixingSums mixing_sums(std::span<const PaperGenders> papers);

/// Female/male/female-female paper counts per 100 two-author papers implied by
/// (alpha, pi), pi being the female proportion.
template <class Num>
struct BasicFMDecomposition {
    Num pi{};
    Num alpha{};
    Num fm{};
    Num mm{};
    Num ff{};
};

using FMDecomposition = BasicFMDecomposition<double>;

FMDecomposition fm_decomposition(double alpha, double pi);
/// Rational arithmetic; fm + mm + ff == 100 holds exactly.
BasicFMDecomposition<Rational> fm_decomposition_exact(Rational alpha, Rational pi);

/// Attainable alpha range when every paper has two authors; pi is the share
/// of the less frequent gender, in (0, 0.5].
std::pair<double, double> alpha_bounds(double pi);

}  // namespace homophily
