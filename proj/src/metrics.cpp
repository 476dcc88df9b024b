#include "homophily/metrics.hpp"

namespace homophily {

AlphaResult compute_alpha(std::span<const PaperGenders> papers) {
    return detail::alpha_by_authorship<double>(papers);
}

ExactAlphaResult compute_alpha_exact(std::span<const PaperGenders> papers) {
    return detail::alpha_by_authorship<Rational>(papers);
}

std::vector<PaperGenders> papers_of_field(const Corpus& corpus, Index field) {
    std::vector<PaperGenders> out;
    for (Index p : corpus.papers_under(field)) {
        PaperGenders g;
        for (Index a : corpus.papers()[p].authorships) g.push_back(corpus.authorships()[a].gender);
        out.push_back(std::move(g));
    }
    return out;
}

AlphaResult compute_alpha(const Corpus& corpus, Index field) {
    auto papers = papers_of_field(corpus, field);
    return compute_alpha(papers);
}

nlohmann::json to_json(const AlphaResult& r) {
    nlohmann::json j{{"n_female", r.n_female}, {"n_male", r.n_male}, {"defined", r.defined}};
    j["p"] = r.n_male ? nlohmann::json(r.p) : nlohmann::json(nullptr);
    j["q"] = r.n_female ? nlohmann::json(r.q) : nlohmann::json(nullptr);
    j["alpha"] = r.defined ? nlohmann::json(r.alpha) : nlohmann::json(nullptr);
    return j;
}

void MixingSums::add_paper(std::int64_t females, std::int64_t males) {
    const auto n = static_cast<double>(females + males);
    if (females + males < 2) throw Error("metrics", "alpha needs every paper to have at least two authorships");
    male_sum += static_cast<double>(males * (males - 1)) / (n - 1.0);
    female_sum += static_cast<double>(females * males) / (n - 1.0);
    n_male += males;
    n_female += females;
}

MixingSums& MixingSums::operator+=(const MixingSums& o) {
    male_sum += o.male_sum;
    female_sum += o.female_sum;
    n_male += o.n_male;
    n_female += o.n_female;
    return *this;
}

std::optional<double> MixingSums::alpha() const {
    if (!defined()) return std::nullopt;
    return male_sum / static_cast<double>(n_male) - female_sum / static_cast<double>(n_female);
}

MixingSums mixing_sums(std::span<const PaperGenders> papers) {
    MixingSums s;
    for (const auto& paper : papers) {
        std::int64_t f = 0, m = 0;
        for (Gender g : paper) {
            if (g == Gender::Unassigned) throw Error("metrics", "alpha is undefined for Unassigned authorships");
            (g == Gender::Male ? m : f) += 1;
        }
        s.add_paper(f, m);
    }
    return s;
}

namespace {

template <class Num>
BasicFMDecomposition<Num> decompose(Num alpha, Num pi, Num eps) {
    const Num zero(0), one(1);
    if (!(pi > zero && pi < one)) throw Error("metrics", "female proportion must lie in (0, 1)");
    if (!(alpha <= one)) throw Error("metrics", "alpha must not exceed 1");
    BasicFMDecomposition<Num> d{pi, alpha, zero, zero, zero};
    d.fm = Num(200) * (one - alpha) * pi * (one - pi);
    d.mm = Num(100) * (one - pi) * (one - (one - alpha) * pi);
    d.ff = Num(100) * pi * (one - (one - alpha) * (one - pi));
    for (const Num& v : {d.fm, d.mm, d.ff}) {
        if (v < -eps || v > Num(100) + eps) throw Error("metrics", "infeasible (alpha, pi) pair");
    }
    return d;
}

}  // namespace

FMDecomposition fm_decomposition(double alpha, double pi) { return decompose(alpha, pi, 1e-9); }

BasicFMDecomposition<Rational> fm_decomposition_exact(Rational alpha, Rational pi) {
    return decompose(alpha, pi, Rational(0));
}

std::pair<double, double> alpha_bounds(double pi) {
    if (!(pi > 0.0 && pi <= 0.5)) throw Error("metrics", "pi must lie in (0, 0.5]");
    return {-1.0 / (2.0 - 2.0 * pi), 1.0};
}

}  // namespace homophily
