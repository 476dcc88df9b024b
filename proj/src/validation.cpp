#include "homophily/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "homophily/error.hpp"
#include "homophily/rng.hpp"

namespace homophily {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string rational_text(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

double as_double(const Rational& r) { return double(r.numerator()) / double(r.denominator()); }

double value_or_one(const std::optional<Rational>& a) { return a ? as_double(*a) : 1.0; }

void too_large() { throw Error("validation", "instance too large for exact oracle"); }

}  // namespace

void SynthSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error("validation", "invalid synthetic spec: " + what); };
    if (fields.empty()) fail("no fields");
    if (size_weights.empty()) fail("size_weights is empty");
    double total = 0.0;
    for (double w : size_weights) {
        if (!(w >= 0.0)) fail("size weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) fail("size weights must not all be zero");
    if (!is_probability(homophily) || !is_probability(cross_flow) || !is_probability(missing_rate))
        fail("homophily, cross_flow and missing_rate must lie in [0, 1]");
    std::vector<bool> has_children(fields.size(), false);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& f = fields[i];
        if (f.parent && *f.parent >= i) fail("field " + f.id + " must come after its parent");
        if (f.parent) has_children[*f.parent] = true;
        if (!is_probability(f.female_share)) fail("female_share of " + f.id + " outside [0, 1]");
        if (f.homophily && !is_probability(*f.homophily)) fail("homophily of " + f.id + " outside [0, 1]");
        if (f.females.has_value() != f.males.has_value()) fail("field " + f.id + " sets only one of females/males");
    }
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (has_children[i] && (fields[i].papers > 0 || fields[i].solo_papers > 0))
            fail("non-terminal field " + fields[i].id + " cannot hold papers");
}

nlohmann::json SynthSpec::to_json() const {
    auto fs = nlohmann::json::array();
    for (const auto& f : fields) {
        nlohmann::json j{{"id", f.id}, {"papers", f.papers}, {"female_share", f.female_share},
                         {"solo_papers", f.solo_papers}};
        if (f.parent) j["parent"] = *f.parent;
        if (f.homophily) j["homophily"] = *f.homophily;
        if (f.females) j["females"] = *f.females;
        if (f.males) j["males"] = *f.males;
        fs.push_back(j);
    }
    return {{"fields", fs},         {"size_weights", size_weights}, {"homophily", homophily},
            {"cross_flow", cross_flow}, {"missing_rate", missing_rate}, {"year", year},
            {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        for (const auto& f : j.at("fields")) {
            SynthField x;
            x.id = f.at("id").get<std::string>();
            if (f.contains("parent") && !f["parent"].is_null()) x.parent = f["parent"].get<std::size_t>();
            x.papers = f.value("papers", std::size_t{0});
            x.female_share = f.value("female_share", 0.5);
            if (f.contains("homophily")) x.homophily = f["homophily"].get<double>();
            if (f.contains("females")) x.females = f["females"].get<std::size_t>();
            if (f.contains("males")) x.males = f["males"].get<std::size_t>();
            x.solo_papers = f.value("solo_papers", std::size_t{0});
            s.fields.push_back(std::move(x));
        }
        if (j.contains("size_weights")) s.size_weights = j["size_weights"].get<std::vector<double>>();
        s.homophily = j.value("homophily", s.homophily);
        s.cross_flow = j.value("cross_flow", s.cross_flow);
        s.missing_rate = j.value("missing_rate", s.missing_rate);
        s.year = j.value("year", s.year);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error("validation", std::string("invalid synthetic spec: ") + e.what());
    }
    return s;
}

SynthSpec tree_spec(std::size_t top_fields, std::size_t leaves_per_top, std::size_t papers_per_leaf,
                    std::uint64_t seed) {
    SynthSpec s;
    s.seed = seed;
    const std::size_t leaves = top_fields * leaves_per_top;
    std::size_t leaf = 0;
    for (std::size_t t = 0; t < top_fields; ++t) {
        const std::size_t parent = s.fields.size();
        SynthField top;
        top.id = "T" + std::to_string(t);
        s.fields.push_back(top);
        for (std::size_t l = 0; l < leaves_per_top; ++l, ++leaf) {
            const double share = leaves > 1 ? 0.2 + 0.4 * double(leaf) / double(leaves - 1) : 0.4;
            SynthField f;
            f.id = top.id + "." + std::to_string(l);
            f.parent = parent;
            f.papers = papers_per_leaf;
            f.female_share = share;
            s.fields.push_back(f);
        }
    }
    return s;
}

Corpus generate_corpus(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    CorpusBuilder b;
    std::vector<Index> index;
    std::vector<bool> has_children(spec.fields.size(), false);
    for (const auto& f : spec.fields) {
        std::optional<Index> parent;
        if (f.parent) {
            parent = index[*f.parent];
            has_children[*f.parent] = true;
        }
        index.push_back(b.add_field(f.id, parent));
    }
    double weight_total = 0.0;
    for (double w : spec.size_weights) weight_total += w;
    auto draw_size = [&] {
        double u = rng.uniform() * weight_total;
        for (std::size_t k = 0; k < spec.size_weights.size(); ++k) {
            if (u < spec.size_weights[k]) return k + 2;
            u -= spec.size_weights[k];
        }
        return spec.size_weights.size() + 1;
    };
    auto maybe_hide = [&](Gender g) {
        return spec.missing_rate > 0.0 && rng.uniform() < spec.missing_rate ? Gender::Unassigned : g;
    };

    std::vector<std::size_t> leaves;
    for (std::size_t i = 0; i < spec.fields.size(); ++i)
        if (!has_children[i]) leaves.push_back(i);

    for (std::size_t li : leaves) {
        const auto& f = spec.fields[li];
        std::vector<std::size_t> sizes(f.papers);
        std::size_t slots = 0;
        for (auto& s : sizes) slots += (s = draw_size());
        std::size_t females = 0, males = 0;
        if (f.females) {
            females = *f.females;
            males = *f.males;
            if (females + males != slots)
                throw Error("validation", "infeasible spec: field " + f.id + " needs " + std::to_string(slots) +
                                              " authorships but its pool holds " + std::to_string(females + males));
        } else {
            females = static_cast<std::size_t>(std::llround(f.female_share * double(slots)));
            males = slots - females;
        }
        const double strength = f.homophily.value_or(spec.homophily);
        auto draw_any = [&] {
            const bool female = rng.uniform() * double(females + males) < double(females);
            (female ? females : males) -= 1;
            return female ? Gender::Female : Gender::Male;
        };
        std::size_t p = 0;
        for (auto size : sizes) {
            std::vector<Gender> g;
            g.push_back(draw_any());
            for (std::size_t k = 1; k < size; ++k) {
                const bool copy = strength > 0.0 && rng.uniform() < strength;
                std::size_t& same = g.front() == Gender::Female ? females : males;
                if (copy && same > 0) {
                    --same;
                    g.push_back(g.front());
                } else {
                    g.push_back(draw_any());
                }
            }
            for (auto& x : g) x = maybe_hide(x);
            b.add_paper(index[li], g, spec.year, f.id + "-p" + std::to_string(p++));
        }
        for (std::size_t s = 0; s < f.solo_papers; ++s) {
            const Gender g = rng.uniform() < f.female_share ? Gender::Female : Gender::Male;
            std::vector<Gender> one{maybe_hide(g)};
            b.add_paper(index[li], one, spec.year, f.id + "-s" + std::to_string(s));
        }
    }

    for (std::size_t li : leaves) {
        std::vector<std::size_t> siblings;
        for (std::size_t lj : leaves)
            if (lj != li && spec.fields[lj].parent == spec.fields[li].parent) siblings.push_back(lj);
        if (spec.cross_flow > 0.0 && !siblings.empty()) {
            b.add_flow(index[li], index[li], 1.0 - spec.cross_flow);
            for (std::size_t lj : siblings) b.add_flow(index[li], index[lj], spec.cross_flow / double(siblings.size()));
        } else {
            b.add_flow(index[li], index[li], 1.0);
        }
    }
    return b.build();
}

// ------------------------------------------------------------ exact null

const std::vector<AlphaAtom>& ExactNull::distribution(Index field) const {
    auto it = std::find(fields.begin(), fields.end(), field);
    if (it == fields.end()) throw Error("validation", "field index " + std::to_string(field) + " was not enumerated");
    return distributions[std::size_t(it - fields.begin())];
}

double ExactNull::expected_alpha(Index field) const {
    double e = 0.0;
    for (const auto& a : distribution(field)) e += a.probability * value_or_one(a.alpha);
    return e;
}

double ExactNull::p_value(Index field, std::optional<double> observed) const {
    const double obs = observed.value_or(1.0);
    double p = 0.0;
    for (const auto& a : distribution(field))
        if (value_or_one(a.alpha) >= obs - 1e-12) p += a.probability;
    return std::min(1.0, p);
}

nlohmann::json ExactNull::to_json(const Corpus& corpus) const {
    nlohmann::json out;
    out["tables"] = tables;
    auto& list = out["fields"] = nlohmann::json::array();
    for (std::size_t k = 0; k < fields.size(); ++k) {
        nlohmann::json f{{"field_id", corpus.fields()[fields[k]].id}, {"expected_alpha", expected_alpha(fields[k])}};
        auto& support = f["support"] = nlohmann::json::array();
        for (const auto& a : distributions[k]) {
            if (a.alpha)
                support.push_back({{"alpha", as_double(*a.alpha)}, {"exact", rational_text(*a.alpha)},
                                   {"probability", a.probability}});
            else
                support.push_back({{"alpha", nullptr}, {"exact", "undefined"}, {"probability", a.probability}});
        }
        list.push_back(std::move(f));
    }
    return out;
}

ExactNull enumerate_null_exact(const Corpus& corpus, const SwapMatrix& matrix, std::uint64_t cap) {
    const auto& papers = corpus.papers();
    const auto& auths = corpus.authorships();
    const auto n_terminals = corpus.terminal_fields().size();
    if (matrix.size() != n_terminals) throw Error("validation", "swap matrix does not match the corpus");

    // Types are (origin terminal, gender); index = 2 * terminal + male.
    const std::size_t n_types = 2 * n_terminals;
    std::vector<std::int64_t> remaining(n_types, 0);
    std::vector<Index> paper_terminal(papers.size());
    for (Index p = 0; p < papers.size(); ++p) {
        paper_terminal[p] = *corpus.terminal_index(papers[p].field);
        if (papers[p].authorships.size() < 2) throw Error("validation", "exact oracle needs a cleaned corpus");
        for (Index a : papers[p].authorships) {
            if (auths[a].gender == Gender::Unassigned) throw Error("validation", "exact oracle needs a cleaned corpus");
            remaining[2 * paper_terminal[p] + (auths[a].gender == Gender::Male)] += 1;
        }
    }
    std::vector<double> log_fact(auths.size() + 2, 0.0);
    for (std::size_t i = 1; i < log_fact.size(); ++i) log_fact[i] = log_fact[i - 1] + std::log(double(i));

    ExactNull out;
    for (Index f = 0; f < corpus.fields().size(); ++f)
        if (!corpus.papers_under(f).empty()) out.fields.push_back(f);
    std::vector<std::vector<Index>> field_papers;
    for (Index f : out.fields) field_papers.push_back(corpus.papers_under(f));

    using Key = std::pair<bool, Rational>;  // (undefined, alpha)
    std::vector<std::map<Key, double>> mass(out.fields.size());
    std::vector<std::int64_t> males(papers.size(), 0);
    double total_weight = 0.0;

    auto record = [&](double log_weight) {
        if (++out.tables > cap) too_large();
        const double w = std::exp(log_weight);
        total_weight += w;
        for (std::size_t k = 0; k < out.fields.size(); ++k) {
            Rational male_sum(0), female_sum(0);
            std::int64_t nm = 0, nf = 0;
            for (Index p : field_papers[k]) {
                const auto n = std::int64_t(papers[p].authorships.size());
                const auto m = males[p];
                male_sum += Rational(m * (m - 1), n - 1);
                female_sum += Rational((n - m) * m, n - 1);
                nm += m;
                nf += n - m;
            }
            Key key{true, Rational(0)};
            if (nm > 0 && nf > 0) key = {false, male_sum / Rational(nm) - female_sum / Rational(nf)};
            mass[k][key] += w;
        }
    };

    std::uint64_t nodes = 0;
    // Fill paper p one type at a time: `type` is the next type to consider,
    // `left` the unfilled slots of paper p.
    std::function<void(Index, std::size_t, std::int64_t, double)> fill = [&](Index p, std::size_t type,
                                                                            std::int64_t left, double logw) {
        if (++nodes > 64 * cap) too_large();
        if (p == papers.size()) {
            record(logw);
            return;
        }
        if (left == 0) {
            const Index next = p + 1;
            fill(next, 0, next < papers.size() ? std::int64_t(papers[next].authorships.size()) : 0, logw);
            return;
        }
        if (type == n_types) return;
        const double prob = matrix(paper_terminal[p], Index(type / 2));
        const std::int64_t most = prob > 0.0 ? std::min(left, remaining[type]) : 0;
        for (std::int64_t k = most; k >= 0; --k) {
            remaining[type] -= k;
            if (type % 2 == 1) males[p] += k;
            const double step = k == 0 ? 0.0 : double(k) * std::log(prob) - log_fact[std::size_t(k)];
            fill(p, type + 1, left - k, logw + step);
            remaining[type] += k;
            if (type % 2 == 1) males[p] -= k;
        }
    };
    double base = 0.0;
    for (auto c : remaining) base += log_fact[std::size_t(c)];
    if (papers.empty()) {
        record(0.0);
    } else {
        fill(0, 0, std::int64_t(papers[0].authorships.size()), base);
    }
    if (!(total_weight > 0.0)) throw Error("validation", "the observed configuration has zero null density");

    for (std::size_t k = 0; k < out.fields.size(); ++k) {
        std::vector<AlphaAtom> atoms;
        for (const auto& [key, w] : mass[k]) {
            if (key.first) continue;
            atoms.push_back({key.second, w / total_weight});
        }
        for (const auto& [key, w] : mass[k])
            if (key.first) atoms.push_back({std::nullopt, w / total_weight});
        out.distributions.push_back(std::move(atoms));
    }
    return out;
}

std::vector<ConfigurationAtom> enumerate_configurations(const Corpus& corpus, const SwapMatrix& matrix,
                                                        std::uint64_t cap) {
    const auto& papers = corpus.papers();
    const auto& auths = corpus.authorships();
    if (matrix.size() != corpus.terminal_fields().size())
        throw Error("validation", "swap matrix does not match the corpus");
    std::vector<Index> paper_terminal(papers.size());
    std::vector<std::int64_t> capacity(papers.size());
    for (Index p = 0; p < papers.size(); ++p) {
        paper_terminal[p] = *corpus.terminal_index(papers[p].field);
        capacity[p] = std::int64_t(papers[p].authorships.size());
    }
    std::vector<Index> origin(auths.size());
    for (Index a = 0; a < auths.size(); ++a) origin[a] = paper_terminal[auths[a].paper];

    std::vector<ConfigurationAtom> out;
    std::vector<Index> current(auths.size());
    double total = 0.0;
    std::function<void(Index, double)> place = [&](Index a, double w) {
        if (a == auths.size()) {
            if (out.size() >= cap) too_large();
            out.push_back({current, w});
            total += w;
            return;
        }
        for (Index p = 0; p < papers.size(); ++p) {
            if (capacity[p] == 0) continue;
            const double prob = matrix(paper_terminal[p], origin[a]);
            if (prob == 0.0) continue;
            --capacity[p];
            current[a] = p;
            place(a + 1, w * prob);
            ++capacity[p];
        }
    };
    place(0, 1.0);
    if (!(total > 0.0)) throw Error("validation", "the observed configuration has zero null density");
    for (auto& atom : out) atom.probability /= total;
    return out;
}

}  // namespace homophily
