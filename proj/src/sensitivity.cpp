#include "homophily/sensitivity.hpp"

#include <ostream>

#include "homophily/error.hpp"
#include "homophily/flow.hpp"
#include "homophily/parallel.hpp"

namespace homophily {

std::string_view to_string(ImputationKind k) noexcept {
    return k == ImputationKind::LowHomophily ? "low" : "high";
}

ImputationKind parse_imputation_kind(std::string_view s) {
    if (s == "low") return ImputationKind::LowHomophily;
    if (s == "high") return ImputationKind::HighHomophily;
    throw Error("sensitivity", "unknown imputation scenario '" + std::string(s) + "' (expected low or high)");
}

namespace {

struct Shares {
    std::size_t female = 0;
    std::size_t male = 0;

    void add(Gender g) {
        female += g == Gender::Female;
        male += g == Gender::Male;
    }
    std::size_t assigned() const { return female + male; }
    double female_share() const { return double(female) / double(assigned()); }
};

Gender draw(const Shares& s, Rng& rng) { return rng.bernoulli(s.female_share()) ? Gender::Female : Gender::Male; }

}  // namespace

Corpus impute_missing(const Corpus& corpus, ImputationKind kind, Rng& rng) {
    const auto& auths = corpus.authorships();
    const auto& papers = corpus.papers();
    std::vector<Shares> by_field(corpus.fields().size());
    for (const auto& p : papers)
        for (Index a : p.authorships) by_field[p.field].add(auths[a].gender);
    auto field_shares = [&](Index field) -> const Shares& {
        const auto& s = by_field[field];
        if (s.assigned() == 0)
            throw Error("sensitivity", "terminal field '" + corpus.fields()[field].id +
                                           "' has no assigned genders to impute from");
        return s;
    };

    std::vector<Gender> genders(auths.size());
    for (Index a = 0; a < auths.size(); ++a) genders[a] = auths[a].gender;
    for (const auto& p : papers) {
        if (kind == ImputationKind::LowHomophily) {
            for (Index a : p.authorships)
                if (genders[a] == Gender::Unassigned) genders[a] = draw(field_shares(p.field), rng);
            continue;
        }
        Shares own;
        for (Index a : p.authorships) own.add(auths[a].gender);
        if (own.assigned() == p.authorships.size()) continue;
        if (own.assigned() == 0) {
            const Gender g = draw(field_shares(p.field), rng);
            for (Index a : p.authorships) genders[a] = g;
            continue;
        }
        for (Index a : p.authorships)
            if (genders[a] == Gender::Unassigned) genders[a] = draw(own, rng);
    }
    return corpus.with_genders(genders);
}

void SensitivityReport::write_csv(std::ostream& out) const {
    out << "scenario,imputation,terminal,composite,top,terminal_significant,terminal_total,"
           "composite_significant,composite_total,top_significant,top_total\n";
    for (const auto& r : rows)
        out << to_string(kind) << ',' << r.imputation << ',' << r.terminal << ',' << r.composite << ',' << r.top
            << ',' << r.terminal_count.significant << ',' << r.terminal_count.total << ','
            << r.composite_count.significant << ',' << r.composite_count.total << ',' << r.top_count.significant
            << ',' << r.top_count.total << '\n';
    out << to_string(kind) << ",average," << terminal << ',' << composite << ',' << top << ",,,,,,\n";
}

nlohmann::json SensitivityReport::to_json() const {
    auto rs = nlohmann::json::array();
    for (const auto& r : rows)
        rs.push_back({{"imputation", r.imputation},
                      {"terminal", r.terminal},
                      {"composite", r.composite},
                      {"top", r.top}});
    return {{"scenario", std::string(to_string(kind))},
            {"rows", rs},
            {"average", {{"terminal", terminal}, {"composite", composite}, {"top", top}}}};
}

SensitivityReport run_sensitivity(const Corpus& corpus, const ImputationScenario& scenario,
                                  const SensitivityPlan& plan) {
    if (scenario.imputations == 0) throw Error("sensitivity", "at least one imputation is required");
    if (plan.chains == 0) throw Error("sensitivity", "at least one chain is required");
    SensitivityReport report;
    report.kind = scenario.kind;
    report.rows.resize(scenario.imputations);
    const auto plans = chain_plans(plan.chain, plan.chains);
    parallel_for(scenario.imputations, plan.threads, [&](std::size_t m) {
        Rng rng(scenario.base_seed + m);
        const auto cleaned = clean_corpus(impute_missing(corpus, scenario.kind, rng)).corpus;
        const auto matrix = build_swap_matrix(cleaned, plan.flow_threshold);
        const auto suite = run_full_test(cleaned, matrix, plans, plan.test).suite;
        auto& row = report.rows[m];
        row.imputation = m;
        row.terminal = suite.significant_fraction(LevelTag::Terminal);
        row.composite = suite.significant_fraction(LevelTag::Composite);
        row.top = suite.significant_fraction(LevelTag::Top);
        row.terminal_count = suite.terminal;
        row.composite_count = suite.composite;
        row.top_count = suite.top;
    });
    for (const auto& r : report.rows) {
        report.terminal += r.terminal;
        report.composite += r.composite;
        report.top += r.top;
    }
    const double m = double(report.rows.size());
    report.terminal /= m;
    report.composite /= m;
    report.top /= m;
    return report;
}

}  // namespace homophily
