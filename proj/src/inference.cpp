#include "homophily/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "homophily/error.hpp"
#include "homophily/metrics.hpp"
#include "homophily/parallel.hpp"

namespace homophily {

namespace {

constexpr double kTieTolerance = 1e-12;

double as_alpha(double v) { return std::isnan(v) ? 1.0 : v; }

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

double fm_at(std::optional<double> alpha, double pi) {
    if (!(pi > 0.0 && pi < 1.0)) return 0.0;
    try {
        return fm_decomposition(alpha.value_or(1.0), pi).fm;
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

double empirical_pvalue(std::optional<double> observed, std::span<const double> trace, bool plus_one) {
    if (trace.empty()) throw Error("inference", "empty trace");
    const double obs = observed && !std::isnan(*observed) ? *observed : 1.0;
    std::size_t hits = 0;
    for (double v : trace) hits += as_alpha(v) >= obs - kTieTolerance;
    if (plus_one) return double(hits + 1) / double(trace.size() + 1);
    return double(hits) / double(trace.size());
}

double expected_alpha(std::span<const double> trace) {
    if (trace.empty()) throw Error("inference", "empty trace");
    double s = 0;
    for (double v : trace) s += as_alpha(v);
    return s / double(trace.size());
}

std::string_view to_string(FdrProcedure p) noexcept { return p == FdrProcedure::BH ? "BH" : "BY"; }

FdrProcedure parse_fdr_procedure(std::string_view s) {
    if (s == "BH" || s == "bh") return FdrProcedure::BH;
    if (s == "BY" || s == "by") return FdrProcedure::BY;
    throw Error("inference", "unknown FDR procedure '" + std::string(s) + "' (expected BH or BY)");
}

FdrResult fdr_adjust(std::span<const double> pvalues, FdrProcedure procedure, double rate) {
    if (!(rate > 0.0 && rate < 1.0)) throw Error("inference", "FDR rate must lie in (0, 1)");
    const std::size_t m = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0)) throw Error("inference", "p-values must lie in [0, 1]");
    FdrResult r{std::vector<double>(m), std::vector<bool>(m)};
    if (m == 0) return r;
    double scale = double(m);
    if (procedure == FdrProcedure::BY) {
        double c = 0;
        for (std::size_t i = 1; i <= m; ++i) c += 1.0 / double(i);
        scale *= c;
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pvalues[a] < pvalues[b]; });
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t i = order[k];
        running = std::min(running, pvalues[i] * (scale / double(k + 1)));
        r.adjusted[i] = std::min(running, 1.0);
    }
    for (std::size_t i = 0; i < m; ++i) r.rejected[i] = r.adjusted[i] <= rate;
    return r;
}

nlohmann::json TestOptions::to_json() const {
    return {{"procedure", std::string(to_string(procedure))},
            {"rate", rate},
            {"include_root", include_root},
            {"per_level_families", per_level_families},
            {"plus_one", plus_one}};
}

TestOptions TestOptions::from_json(const nlohmann::json& j) {
    TestOptions o;
    o.procedure = parse_fdr_procedure(j.value("procedure", std::string("BY")));
    o.rate = j.value("rate", o.rate);
    o.include_root = j.value("include_root", o.include_root);
    o.per_level_families = j.value("per_level_families", o.per_level_families);
    o.plus_one = j.value("plus_one", o.plus_one);
    return o;
}

std::string FieldResult::p_display() const {
    if (raw_p == 0.0) return "< 1/" + std::to_string(samples);
    return fmt(raw_p);
}

const FieldResult& TestSuiteResult::result(Index field) const {
    for (const auto& r : fields)
        if (r.field == field) return r;
    throw Error("inference", "field was not tested");
}

const LevelCount& TestSuiteResult::count(LevelTag tag) const {
    switch (tag) {
        case LevelTag::Root: return root;
        case LevelTag::Top: return top;
        case LevelTag::Composite: return composite;
        default: return terminal;
    }
}

double TestSuiteResult::significant_fraction(LevelTag tag) const {
    const auto& c = count(tag);
    return c.total ? double(c.significant) / double(c.total) : 0.0;
}

nlohmann::json TestSuiteResult::to_json() const {
    auto j = nlohmann::json::object();
    j["options"] = options.to_json();
    auto counts = nlohmann::json::object();
    for (LevelTag t : {LevelTag::Root, LevelTag::Top, LevelTag::Composite, LevelTag::Terminal})
        counts[std::string(level_name(t))] = {{"significant", count(t).significant}, {"total", count(t).total}};
    j["counts"] = counts;
    auto rows = nlohmann::json::array();
    for (const auto& r : fields) {
        rows.push_back({{"field", r.field_id},
                        {"level", std::string(level_name(r.level))},
                        {"observed_alpha", r.observed_alpha ? nlohmann::json(*r.observed_alpha) : nlohmann::json()},
                        {"expected_alpha", r.expected_alpha},
                        {"raw_p", r.raw_p},
                        {"p_display", r.p_display()},
                        {"adjusted_p", r.adjusted_p},
                        {"in_family", r.in_family},
                        {"significant", r.significant},
                        {"female_share", r.female_share},
                        {"fm_observed", std::isnan(r.fm_observed) ? nlohmann::json() : nlohmann::json(r.fm_observed)},
                        {"fm_expected", std::isnan(r.fm_expected) ? nlohmann::json() : nlohmann::json(r.fm_expected)},
                        {"samples", r.samples}});
    }
    j["fields"] = rows;
    return j;
}

const std::vector<double>& PooledTraces::trace(Index field) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i] == field) return traces[i];
    throw Error("inference", "missing trace for field " + std::to_string(field));
}

PooledTraces pool_traces(std::span<const ChainRun> runs) {
    if (runs.empty()) throw Error("inference", "no chains to pool");
    PooledTraces out{runs[0].fields, std::vector<std::vector<double>>(runs[0].fields.size())};
    for (const auto& run : runs) {
        if (run.fields != out.fields) throw Error("inference", "chains track different fields");
        for (std::size_t i = 0; i < out.fields.size(); ++i)
            out.traces[i].insert(out.traces[i].end(), run.traces[i].begin(), run.traces[i].end());
    }
    return out;
}

TestSuiteResult evaluate_traces(const Corpus& corpus, const PooledTraces& pooled, const TestOptions& options) {
    if (!(options.rate > 0.0 && options.rate < 1.0)) throw Error("inference", "FDR rate must lie in (0, 1)");
    TestSuiteResult suite;
    suite.options = options;
    for (Index f : fields_with_papers(corpus)) {
        const std::vector<double>* trace = nullptr;
        for (std::size_t i = 0; i < pooled.fields.size(); ++i)
            if (pooled.fields[i] == f) trace = &pooled.traces[i];
        if (!trace) throw Error("inference", "missing trace for tracked field '" + corpus.fields()[f].id + "'");
        FieldResult r;
        r.field = f;
        r.field_id = corpus.fields()[f].id;
        r.level = corpus.level_tag(f);
        const auto obs = compute_alpha(corpus, f);
        if (obs.defined) r.observed_alpha = obs.alpha;
        r.samples = trace->size();
        r.expected_alpha = expected_alpha(*trace);
        r.raw_p = empirical_pvalue(r.observed_alpha, *trace, options.plus_one);
        const auto n = obs.n_female + obs.n_male;
        r.female_share = n ? double(obs.n_female) / double(n) : 0.0;
        r.fm_observed = fm_at(r.observed_alpha, r.female_share);
        r.fm_expected = fm_at(r.expected_alpha, r.female_share);
        r.in_family = options.include_root || r.level != LevelTag::Root;
        r.adjusted_p = r.raw_p;
        suite.fields.push_back(std::move(r));
    }

    std::map<int, std::vector<std::size_t>> families;
    for (std::size_t i = 0; i < suite.fields.size(); ++i) {
        const auto& r = suite.fields[i];
        if (!r.in_family) continue;
        families[options.per_level_families ? int(r.level) : 0].push_back(i);
    }
    for (const auto& [key, members] : families) {
        std::vector<double> p;
        for (auto i : members) p.push_back(suite.fields[i].raw_p);
        auto adj = fdr_adjust(p, options.procedure, options.rate);
        for (std::size_t k = 0; k < members.size(); ++k) {
            suite.fields[members[k]].adjusted_p = adj.adjusted[k];
            suite.fields[members[k]].significant = adj.rejected[k];
        }
    }
    for (auto& r : suite.fields) {
        if (!r.in_family) r.significant = r.raw_p <= options.rate;
        LevelCount* c = nullptr;
        switch (r.level) {
            case LevelTag::Root: c = &suite.root; break;
            case LevelTag::Top: c = &suite.top; break;
            case LevelTag::Composite: c = &suite.composite; break;
            case LevelTag::Terminal: c = &suite.terminal; break;
        }
        ++c->total;
        c->significant += r.significant;
    }
    return suite;
}

std::vector<ChainPlan> chain_plans(const ChainPlan& base, std::size_t chains) {
    std::vector<ChainPlan> out(chains, base);
    for (std::size_t i = 0; i < chains; ++i) out[i].seed = base.seed + i;
    return out;
}

FullTestResult run_full_test(const Corpus& corpus, const SwapMatrix& matrix, std::span<const ChainPlan> plans,
                             const TestOptions& options, std::size_t chain_threads) {
    if (plans.empty()) throw Error("inference", "at least one chain plan is required");
    FullTestResult out;
    out.runs.resize(plans.size());
    parallel_for(plans.size(), chain_threads,
                 [&](std::size_t i) { out.runs[i] = run_chain(corpus, matrix, plans[i]); });
    out.pooled = pool_traces(out.runs);
    out.suite = evaluate_traces(corpus, out.pooled, options);
    return out;
}

namespace {

bool under(const Corpus& corpus, Index field, Index ancestor) {
    if (field == ancestor) return true;
    for (Index a : corpus.ancestors(field))
        if (a == ancestor) return true;
    return false;
}

std::string tally(const TestSuiteResult& result, const Corpus& corpus, Index row, bool terminals) {
    std::size_t sig = 0, total = 0;
    for (const auto& r : result.fields) {
        const bool leaf = corpus.is_leaf(r.field);
        if (terminals ? !leaf : (leaf || r.level != LevelTag::Composite)) continue;
        if (!under(corpus, r.field, row)) continue;
        ++total;
        sig += r.significant;
    }
    return std::to_string(sig) + "/" + std::to_string(total);
}

}  // namespace

void write_results_table(const TestSuiteResult& result, const Corpus& corpus, std::ostream& out) {
    out << "field,obs_alpha,exp_alpha,fm_obs,fm_exp,p,adjusted_p,signif_terminal,signif_composite,p_display\n";
    for (const auto& r : result.fields) {
        if (r.level != LevelTag::Root && r.level != LevelTag::Top) continue;
        out << csv_field(r.field_id) << ',' << (r.observed_alpha ? fmt(*r.observed_alpha) : "NA") << ','
            << fmt(r.expected_alpha) << ',' << fmt(r.fm_observed) << ',' << fmt(r.fm_expected) << ','
            << fmt(r.raw_p) << ',' << fmt(r.adjusted_p) << ',' << tally(result, corpus, r.field, true) << ','
            << tally(result, corpus, r.field, false) << ',' << csv_field(r.p_display()) << '\n';
    }
}

void write_field_results(const TestSuiteResult& result, std::ostream& out) {
    out << "field,level,obs_alpha,exp_alpha,female_share,fm_obs,fm_exp,p,adjusted_p,significant,samples\n";
    for (const auto& r : result.fields) {
        out << csv_field(r.field_id) << ',' << level_name(r.level) << ','
            << (r.observed_alpha ? fmt(*r.observed_alpha) : "NA") << ',' << fmt(r.expected_alpha) << ','
            << fmt(r.female_share) << ',' << fmt(r.fm_observed) << ',' << fmt(r.fm_expected) << ','
            << fmt(r.raw_p) << ',' << fmt(r.adjusted_p) << ',' << (r.significant ? 1 : 0) << ',' << r.samples
            << '\n';
    }
}

nlohmann::json histogram_json(const TestSuiteResult& result, const PooledTraces& pooled, std::size_t bins) {
    if (bins == 0) throw Error("inference", "histogram needs at least one bin");
    auto out = nlohmann::json::array();
    for (const auto& r : result.fields) {
        const auto& trace = pooled.trace(r.field);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::size_t undefined = 0;
        for (double v : trace) {
            if (std::isnan(v)) {
                ++undefined;
                continue;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (r.observed_alpha) {
            lo = std::min(lo, *r.observed_alpha);
            hi = std::max(hi, *r.observed_alpha);
        }
        if (!std::isfinite(lo)) lo = hi = 1.0;
        if (hi - lo < 1e-9) {
            lo -= 0.5;
            hi += 0.5;
        }
        std::vector<std::size_t> counts(bins, 0);
        const double width = (hi - lo) / double(bins);
        for (double v : trace) {
            if (std::isnan(v)) continue;
            auto b = static_cast<std::size_t>((v - lo) / width);
            counts[std::min(b, bins - 1)] += 1;
        }
        std::vector<double> edges(bins + 1);
        for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + width * double(i);
        out.push_back({{"field", r.field_id},
                       {"level", std::string(level_name(r.level))},
                       {"observed", r.observed_alpha ? nlohmann::json(*r.observed_alpha) : nlohmann::json()},
                       {"expected", r.expected_alpha},
                       {"p", r.raw_p},
                       {"edges", edges},
                       {"counts", counts},
                       {"undefined", undefined}});
    }
    return out;
}

nlohmann::json tree_json(const TestSuiteResult& result, const Corpus& corpus) {
    std::map<Index, const FieldResult*> by_field;
    for (const auto& r : result.fields) by_field[r.field] = &r;
    auto node = [&](auto&& self, Index f) -> nlohmann::json {
        nlohmann::json j{{"id", corpus.fields()[f].id}, {"level", std::string(level_name(corpus.level_tag(f)))}};
        if (auto it = by_field.find(f); it != by_field.end()) {
            const auto& r = *it->second;
            j["p"] = r.raw_p;
            j["adjusted_p"] = r.adjusted_p;
            j["significant"] = r.significant;
            j["shade"] = 1.0 - r.adjusted_p;
            j["observed_alpha"] = r.observed_alpha ? nlohmann::json(*r.observed_alpha) : nlohmann::json();
            j["expected_alpha"] = r.expected_alpha;
        }
        auto kids = nlohmann::json::array();
        for (Index c : corpus.fields()[f].children) kids.push_back(self(self, c));
        j["children"] = kids;
        return j;
    };
    return node(node, Corpus::root());
}

NaiveNull build_naive_null(const Corpus& corpus, int level, double threshold) {
    if (level < 1 || level > corpus.max_depth())
        throw Error("inference", "naive level " + std::to_string(level) + " outside 1.." +
                                     std::to_string(corpus.max_depth()));
    const auto& old = corpus.fields();
    NaiveNull out;
    out.field_map.assign(old.size(), std::nullopt);
    std::vector<FieldNode> fields;
    for (Index f = 0; f < old.size(); ++f) {
        if (old[f].level > level) continue;
        out.field_map[f] = Index(fields.size());
        FieldNode n = old[f];
        n.children.clear();
        fields.push_back(std::move(n));
    }
    for (Index f = 0; f < old.size(); ++f) {
        if (!out.field_map[f]) continue;
        auto& n = fields[*out.field_map[f]];
        if (old[f].parent) n.parent = *out.field_map[*old[f].parent];
        if (old[f].level == level) continue;
        for (Index c : old[f].children) n.children.push_back(*out.field_map[c]);
    }

    // pseudo-terminal (new field index) of every original leaf
    auto target = [&](Index leaf) {
        Index f = leaf;
        while (old[f].level > level) f = *old[f].parent;
        return *out.field_map[f];
    };

    auto papers = corpus.papers();
    for (auto& p : papers) p.field = target(p.field);

    // complete every row with its residual self flow, then average rows within
    // each group weighted by authorship counts
    const auto& terms = corpus.terminal_fields();
    std::map<Index, std::map<Index, double>> rows;
    for (const auto& fl : corpus.flows()) rows[fl.from][fl.to] += fl.proportion;
    std::vector<double> weight(old.size(), 0.0);
    for (const auto& p : corpus.papers()) weight[p.field] += double(p.authorships.size());
    std::map<Index, std::vector<Index>> groups;
    for (Index t : terms) groups[target(t)].push_back(t);

    std::vector<CitationFlow> flows;
    for (const auto& [g, members] : groups) {
        std::map<Index, double> agg;
        if (members.size() == 1) {
            for (const auto& fl : corpus.flows())
                if (fl.from == members[0]) agg[target(fl.to)] += fl.proportion;
            if (!rows[members[0]].count(members[0])) {
                double s = 0;
                for (const auto& [to, p] : rows[members[0]]) s += p;
                if (1.0 - s > 0) agg[g] += 1.0 - s;
            }
        } else {
            double total = 0;
            for (Index t : members) total += weight[t];
            for (Index t : members) {
                const double w = total > 0 ? weight[t] / total : 1.0 / double(members.size());
                auto& row = rows[t];
                double s = 0;
                for (const auto& [to, p] : row) {
                    agg[target(to)] += w * p;
                    s += p;
                }
                if (!row.count(t) && 1.0 - s > 0) agg[g] += w * (1.0 - s);
            }
        }
        for (const auto& [to, p] : agg)
            if (p > 0) flows.push_back({g, to, std::min(p, 1.0)});
    }

    out.corpus = Corpus(std::move(fields), std::move(papers), corpus.authorships(), std::move(flows),
                        corpus.provenance());
    out.matrix = build_swap_matrix(out.corpus, threshold);
    return out;
}

}  // namespace homophily
