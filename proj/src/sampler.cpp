#include "homophily/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "homophily/error.hpp"
#include "homophily/parallel.hpp"
#include "tsv.hpp"

namespace homophily {

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'M', 'P', 'H', 'C', 'K', 'P', 'T'};
constexpr char kTraceMagic[8] = {'H', 'M', 'P', 'H', 'T', 'R', 'C', 'E'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kBlockLength = 256;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t& pos, std::string_view what) {
    if (pos + 4 > in.size()) throw Error("sampler", std::string(what) + " is truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos, std::string_view what) {
    if (pos + 8 > in.size()) throw Error("sampler", std::string(what) + " is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

std::size_t length_cap(std::size_t pool_size) { return std::max<std::size_t>(2, pool_size + 1); }

double length_pmf(std::size_t l, double c, CycleLengthMode mode, std::size_t cap) {
    if (l < 2 || l > cap) return 0.0;
    if (mode == CycleLengthMode::Geometric) {
        const double tail = std::pow(c, double(l - 2));
        return l == cap ? tail : (1.0 - c) * tail;
    }
    auto p_raw = [&](std::size_t L) {
        const double tail = std::pow(c, double(L - 1));
        return L == cap ? tail : (1.0 - c) * tail;
    };
    return l == 2 ? p_raw(1) + p_raw(2) : p_raw(l);
}

bool has_repeat(std::span<const Index> cycle) {
    for (std::size_t i = 1; i < cycle.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (cycle[i] == cycle[j]) return true;
    return false;
}

}  // namespace

std::string_view to_string(CycleLengthMode m) noexcept {
    return m == CycleLengthMode::Geometric ? "geometric" : "clamped";
}

CycleLengthMode parse_cycle_length_mode(std::string_view s) {
    if (s == "geometric") return CycleLengthMode::Geometric;
    if (s == "clamped") return CycleLengthMode::ClampedGeometric;
    throw Error("sampler", "unknown cycle length mode '" + std::string(s) + "' (expected geometric or clamped)");
}

void ChainPlan::validate(const Corpus& corpus) const {
    if (iterations <= burn_in) throw Error("sampler", "iterations must exceed burn_in (no post-burn-in samples)");
    if (!(continue_prob > 0.0 && continue_prob < 1.0)) throw Error("sampler", "continue_prob must lie in (0, 1)");
    if (thin == 0) throw Error("sampler", "thin must be positive");
    if (proposals_per_iteration == 0) throw Error("sampler", "proposals_per_iteration must be positive");
    if (threads == 0) throw Error("sampler", "threads must be positive");
    for (Index f : tracked_fields)
        if (f >= corpus.fields().size()) throw Error("sampler", "unknown tracked field index " + std::to_string(f));
}

nlohmann::json ChainPlan::to_json() const {
    return {{"iterations", iterations},
            {"burn_in", burn_in},
            {"thin", thin},
            {"seed", seed},
            {"continue_prob", continue_prob},
            {"tracked_fields", tracked_fields},
            {"proposals_per_iteration", proposals_per_iteration},
            {"length_mode", std::string(to_string(length_mode))},
            {"check_invariants", check_invariants},
            {"threads", threads}};
}

ChainPlan ChainPlan::from_json(const nlohmann::json& j) {
    ChainPlan p;
    p.iterations = j.value("iterations", p.iterations);
    p.burn_in = j.value("burn_in", p.burn_in);
    p.thin = j.value("thin", p.thin);
    p.seed = j.value("seed", p.seed);
    p.continue_prob = j.value("continue_prob", p.continue_prob);
    p.tracked_fields = j.value("tracked_fields", p.tracked_fields);
    p.proposals_per_iteration = j.value("proposals_per_iteration", p.proposals_per_iteration);
    p.length_mode = parse_cycle_length_mode(j.value("length_mode", std::string("geometric")));
    p.check_invariants = j.value("check_invariants", p.check_invariants);
    p.threads = j.value("threads", p.threads);
    return p;
}

// ---------------------------------------------------------------- layout

SlotLayout::SlotLayout(const Corpus& corpus) {
    const auto& terminals = corpus.terminal_fields();
    const auto& papers = corpus.papers();
    std::vector<std::vector<Index>> by_terminal(terminals.size());
    paper_terminal_.resize(papers.size());
    paper_size_.resize(papers.size());
    paper_first_slot_.resize(papers.size());
    for (Index p = 0; p < papers.size(); ++p) {
        const auto t = corpus.terminal_index(papers[p].field);
        if (!t) throw Error("sampler", "paper " + papers[p].id + " is not in a terminal field");
        paper_terminal_[p] = *t;
        paper_size_[p] = papers[p].authorships.size();
        by_terminal[*t].push_back(p);
    }
    observed_slot_.assign(corpus.authorships().size(), 0);
    terminal_begin_.push_back(0);
    for (Index t = 0; t < terminals.size(); ++t) {
        for (Index p : by_terminal[t]) {
            paper_first_slot_[p] = static_cast<std::uint32_t>(slot_paper_.size());
            for (Index a : papers[p].authorships) {
                observed_slot_[a] = static_cast<std::uint32_t>(slot_paper_.size());
                slot_paper_.push_back(p);
                slot_terminal_.push_back(t);
            }
        }
        terminal_begin_.push_back(static_cast<std::uint32_t>(slot_paper_.size()));
    }
    if (slot_paper_.size() != corpus.authorships().size())
        throw Error("sampler", "every authorship must belong to exactly one paper");
}

// --------------------------------------------------------- configuration

Configuration::Configuration(const Corpus& corpus, const SlotLayout& layout) : layout_(&layout) {
    const auto& auths = corpus.authorships();
    is_male_.resize(auths.size());
    for (Index a = 0; a < auths.size(); ++a) {
        if (auths[a].gender == Gender::Unassigned)
            throw Error("sampler", "authorship " + auths[a].id + " has no gender; clean the corpus first");
        is_male_[a] = auths[a].gender == Gender::Male;
        observed_males_ += is_male_[a];
    }
    const auto n_papers = corpus.papers().size();
    for (Index p = 0; p < n_papers; ++p)
        if (layout.paper_size(p) < 2)
            throw Error("sampler", "paper " + corpus.papers()[p].id + " has fewer than two authorships; clean the corpus first");

    const auto n_terminals = layout.terminal_count();
    std::vector<std::vector<std::int64_t>> sizes(n_terminals);
    for (Index p = 0; p < n_papers; ++p) sizes[layout.paper_terminal(p)].push_back(std::int64_t(layout.paper_size(p)));
    class_begin_.push_back(0);
    for (auto& s : sizes) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        class_size_.insert(class_size_.end(), s.begin(), s.end());
        class_begin_.push_back(class_size_.size());
    }
    paper_class_.resize(n_papers);
    for (Index p = 0; p < n_papers; ++p) {
        const auto t = layout.paper_terminal(p);
        const auto first = class_size_.begin() + std::ptrdiff_t(class_begin_[t]);
        const auto last = class_size_.begin() + std::ptrdiff_t(class_begin_[t + 1]);
        paper_class_[p] = std::size_t(std::lower_bound(first, last, std::int64_t(layout.paper_size(p))) - class_size_.begin());
    }
    terminal_total_.assign(n_terminals, 0);
    for (Index t = 0; t < n_terminals; ++t)
        terminal_total_[t] = layout.terminal_begin()[t + 1] - layout.terminal_begin()[t];

    slot_of_.resize(auths.size());
    for (Index a = 0; a < auths.size(); ++a) slot_of_[a] = layout.observed_slot(a);
    rebuild();
}

void Configuration::rebuild() {
    const auto n_slots = layout_->slot_count();
    occupant_.assign(n_slots, 0);
    std::vector<std::uint8_t> seen(n_slots, 0);
    for (Index a = 0; a < slot_of_.size(); ++a) {
        const auto s = slot_of_[a];
        if (s >= n_slots || seen[s]) throw Error("sampler", "assignment is not a bijection between authorships and slots");
        seen[s] = 1;
        occupant_[s] = a;
    }
    paper_males_.assign(layout_->paper_count(), 0);
    for (Index a = 0; a < slot_of_.size(); ++a) paper_males_[paper_of(a)] += is_male_[a];
    class_mm_.assign(class_size_.size(), 0);
    class_fm_.assign(class_size_.size(), 0);
    terminal_males_.assign(terminal_total_.size(), 0);
    for (Index p = 0; p < paper_males_.size(); ++p) {
        const auto m = paper_males_[p];
        const auto n = std::int64_t(layout_->paper_size(p));
        class_mm_[paper_class_[p]] += m * (m - 1);
        class_fm_[paper_class_[p]] += (n - m) * m;
        terminal_males_[layout_->paper_terminal(p)] += m;
    }
}

void Configuration::update_paper(Index paper, std::int64_t old_males) {
    const auto m = paper_males_[paper];
    if (m == old_males) return;
    const auto n = std::int64_t(layout_->paper_size(paper));
    const auto k = paper_class_[paper];
    class_mm_[k] += m * (m - 1) - old_males * (old_males - 1);
    class_fm_[k] += (n - m) * m - (n - old_males) * old_males;
    terminal_males_[layout_->paper_terminal(paper)] += m - old_males;
}

MixingSums Configuration::terminal_sums(Index t) const {
    MixingSums s;
    for (std::size_t k = class_begin_[t]; k < class_begin_[t + 1]; ++k) {
        const double denom = double(class_size_[k] - 1);
        s.male_sum += double(class_mm_[k]) / denom;
        s.female_sum += double(class_fm_[k]) / denom;
    }
    s.n_male = terminal_males_[t];
    s.n_female = terminal_total_[t] - terminal_males_[t];
    return s;
}

MixingSums Configuration::field_sums(const Corpus& corpus, Index field) const {
    MixingSums s;
    for (Index t : corpus.terminals_under(field)) s += terminal_sums(t);
    return s;
}

std::vector<PaperGenders> Configuration::field_papers(const Corpus& corpus, Index field) const {
    std::vector<PaperGenders> out;
    for (Index p : corpus.papers_under(field)) {
        PaperGenders g;
        const auto first = layout_->paper_first_slot(p);
        for (std::uint32_t s = first; s < first + layout_->paper_size(p); ++s) g.push_back(gender(occupant_[s]));
        out.push_back(std::move(g));
    }
    return out;
}

void Configuration::apply_cycle(std::span<const Index> cycle) {
    const auto l = cycle.size();
    if (l < 2) return;
    struct Touched {
        Index paper;
        std::int64_t males;
    };
    std::vector<Touched> touched;
    touched.reserve(l);
    std::vector<std::uint32_t> next(l);
    for (std::size_t i = 0; i < l; ++i) {
        next[i] = slot_of_[cycle[(i + 1) % l]];
        const Index p = layout_->paper_of_slot(slot_of_[cycle[i]]);
        if (std::none_of(touched.begin(), touched.end(), [&](const Touched& t) { return t.paper == p; }))
            touched.push_back({p, paper_males_[p]});
    }
    for (std::size_t i = 0; i < l; ++i) {
        const Index a = cycle[i];
        if (is_male_[a]) {
            --paper_males_[layout_->paper_of_slot(slot_of_[a])];
            ++paper_males_[layout_->paper_of_slot(next[i])];
        }
    }
    for (std::size_t i = 0; i < l; ++i) {
        slot_of_[cycle[i]] = next[i];
        occupant_[next[i]] = cycle[i];
    }
    for (const auto& t : touched) update_paper(t.paper, t.males);
}

void Configuration::verify(const Corpus& corpus) const {
    auto fail = [](const std::string& what) { throw Error("sampler", "conservation check failed: " + what); };
    for (Index a = 0; a < slot_of_.size(); ++a)
        if (occupant_[slot_of_[a]] != a) fail("slot/occupant index mismatch");

    std::vector<std::int64_t> males(paper_males_.size(), 0), sizes(paper_males_.size(), 0);
    std::int64_t total_males = 0;
    for (Index a = 0; a < slot_of_.size(); ++a) {
        males[paper_of(a)] += is_male_[a];
        sizes[paper_of(a)] += 1;
        total_males += is_male_[a];
    }
    if (total_males != observed_males_) fail("global gender totals changed");
    for (Index p = 0; p < sizes.size(); ++p) {
        if (sizes[p] != std::int64_t(corpus.papers()[p].authorships.size())) fail("paper size changed");
        if (males[p] != paper_males_[p]) fail("cached paper male count drifted");
    }
    std::vector<std::int64_t> per_terminal(terminal_total_.size(), 0);
    for (Index a = 0; a < slot_of_.size(); ++a) per_terminal[terminal_of(a)] += 1;
    std::vector<std::int64_t> observed(terminal_total_.size(), 0);
    for (Index a = 0; a < slot_of_.size(); ++a) observed[layout_->origin_terminal(a)] += 1;
    if (per_terminal != observed || per_terminal != terminal_total_) fail("terminal field total changed");
    std::vector<std::int64_t> mm(class_mm_.size(), 0), fm(class_fm_.size(), 0), tm(terminal_males_.size(), 0);
    for (Index p = 0; p < males.size(); ++p) {
        const auto m = males[p];
        mm[paper_class_[p]] += m * (m - 1);
        fm[paper_class_[p]] += (sizes[p] - m) * m;
        tm[layout_->paper_terminal(p)] += m;
    }
    if (mm != class_mm_ || fm != class_fm_ || tm != terminal_males_) fail("cached alpha statistics drifted");
}

void Configuration::set_assignment(std::span<const std::uint32_t> slot_of) {
    if (slot_of.size() != slot_of_.size()) throw Error("sampler", "assignment size does not match the corpus");
    slot_of_.assign(slot_of.begin(), slot_of.end());
    rebuild();
}

// -------------------------------------------------------------- proposal

std::vector<Index> candidate_set(const Configuration& config, const CandidateIndex& candidates, Index terminal) {
    if (terminal >= config.layout().terminal_count())
        throw Error("sampler", "unknown terminal field index " + std::to_string(terminal));
    std::vector<Index> out;
    for (auto s : candidates.slots(terminal)) out.push_back(config.occupant(s));
    std::sort(out.begin(), out.end());
    return out;
}

CycleProposal propose_cycle(const Configuration& config, const CandidateIndex& candidates,
                            std::span<const Index> pool, Rng& rng, double continue_prob, CycleLengthMode mode) {
    CycleProposal prop;
    if (pool.empty()) return prop;
    const auto cap = length_cap(pool.size());
    const auto& layout = config.layout();
    prop.authorships.push_back(pool[rng.index(pool.size())]);
    auto extend = [&] {
        const Index t = layout.origin_terminal(prop.authorships.back());
        const auto s = candidates.slot(t, rng.index(candidates.size(t)));
        prop.authorships.push_back(config.occupant(s));
    };
    if (mode == CycleLengthMode::Geometric) {
        extend();
        while (prop.authorships.size() < cap && rng.uniform() < continue_prob) extend();
    } else {
        std::size_t length = 1;
        while (length < cap && rng.uniform() < continue_prob) ++length;
        length = std::max<std::size_t>(length, 2);
        while (prop.authorships.size() < length) extend();
    }
    return prop;
}

double acceptance_ratio(const Configuration& config, const CycleProposal& proposal, const SwapMatrix& matrix) {
    const auto& cyc = proposal.authorships;
    const auto l = cyc.size();
    if (l < 2 || has_repeat(cyc)) return 0.0;
    const auto& layout = config.layout();
    double num = 1.0, den = 1.0;
    for (std::size_t i = 0; i < l; ++i) {
        const Index a = cyc[i];
        const Index origin = layout.origin_terminal(a);
        const double proposed = matrix(config.terminal_of(cyc[(i + 1) % l]), origin);
        if (proposed == 0.0) return 0.0;
        num *= proposed;
        den *= matrix(config.terminal_of(a), origin);
    }
    return den > 0.0 ? num / den : 0.0;
}

double proposal_probability(const Configuration& config, const SwapMatrix& matrix, const CandidateIndex& candidates,
                            std::span<const Index> cycle, std::size_t pool_size, double continue_prob,
                            CycleLengthMode mode) {
    const auto l = cycle.size();
    if (l < 2 || pool_size == 0) return 0.0;
    const auto& layout = config.layout();
    double total = 0.0;
    for (std::size_t start = 0; start < l; ++start) {
        double prob = 1.0 / double(pool_size);
        for (std::size_t z = 1; z < l && prob > 0.0; ++z) {
            const Index prev = cycle[(start + z - 1) % l];
            const Index next = cycle[(start + z) % l];
            const Index t = layout.origin_terminal(prev);
            if (!matrix.supported(config.terminal_of(next), t)) prob = 0.0;
            else prob /= double(candidates.size(t));
        }
        total += prob;
    }
    return total * length_pmf(l, continue_prob, mode, length_cap(pool_size));
}

// ----------------------------------------------------------------- chain

const std::vector<double>& ChainRun::trace(Index field) const {
    auto it = std::find(fields.begin(), fields.end(), field);
    if (it == fields.end()) throw Error("sampler", "no trace recorded for field index " + std::to_string(field));
    return traces[std::size_t(it - fields.begin())];
}

bool ChainRun::has_field(Index field) const { return std::find(fields.begin(), fields.end(), field) != fields.end(); }

std::vector<Index> fields_with_papers(const Corpus& corpus) {
    std::vector<std::size_t> per_terminal(corpus.terminal_fields().size(), 0);
    for (const auto& p : corpus.papers()) per_terminal[*corpus.terminal_index(p.field)] += 1;
    std::vector<Index> out;
    for (Index f = 0; f < corpus.fields().size(); ++f) {
        std::size_t n = 0;
        for (Index t : corpus.terminals_under(f)) n += per_terminal[t];
        if (n > 0) out.push_back(f);
    }
    return out;
}

ChainSampler::ChainSampler(const Corpus& corpus, const SwapMatrix& matrix, ChainPlan plan)
    : corpus_(&corpus),
      matrix_(&matrix),
      plan_(std::move(plan)),
      layout_(corpus),
      config_(corpus, layout_) {
    plan_.validate(corpus);
    if (matrix.size() != layout_.terminal_count())
        throw Error("sampler", "swap matrix has " + std::to_string(matrix.size()) + " fields but the corpus has " +
                                   std::to_string(layout_.terminal_count()) + " terminal fields");
    const auto begin = layout_.terminal_begin();
    for (Index t = 0; t < layout_.terminal_count(); ++t) {
        if (begin[t + 1] > begin[t] && !matrix.supported(t, t))
            throw Error("sampler", "terminal field " + corpus.fields()[corpus.terminal_fields()[t]].id +
                                       " has no self-support, so the observed configuration has zero null density");
    }
    candidates_ = CandidateIndex(matrix, begin);
    components_ = components(matrix);

    fields_ = plan_.tracked_fields.empty() ? fields_with_papers(corpus) : plan_.tracked_fields;
    traces_.assign(fields_.size(), {});
    for (auto& t : traces_) t.reserve(plan_.samples());

    const auto n_auth = corpus.authorships().size();
    std::vector<std::vector<Index>> members(components_.count());
    for (Index a = 0; a < n_auth; ++a) members[components_.component_of[layout_.origin_terminal(a)]].push_back(a);
    for (std::size_t c = 0; c < components_.count(); ++c) {
        if (members[c].empty()) continue;
        Component part;
        part.terminals = components_.members[c];
        part.authorships = std::move(members[c]);
        const double share = double(plan_.proposals_per_iteration) * double(part.authorships.size()) / double(n_auth);
        part.proposals_per_iteration = std::max<std::size_t>(1, std::size_t(std::ceil(share - 1e-12)));
        part.rng = Rng(derive_seed(plan_.seed, c));
        part.in_origin = std::int64_t(part.authorships.size());
        parts_.push_back(std::move(part));
    }
}

void ChainSampler::step(Component& c) {
    for (std::size_t r = 0; r < c.proposals_per_iteration; ++r) {
        auto prop = propose_cycle(config_, candidates_, c.authorships, c.rng, plan_.continue_prob, plan_.length_mode);
        const double ratio = acceptance_ratio(config_, prop, *matrix_);
        const double u = c.rng.uniform();
        ++c.counters.proposals;
        if (ratio == 0.0) ++c.counters.zero_density;
        if (!(u < ratio)) continue;
        ++c.counters.accepted;
        const auto& cyc = prop.authorships;
        for (std::size_t i = 0; i < cyc.size(); ++i) {
            const Index origin = layout_.origin_terminal(cyc[i]);
            c.in_origin -= config_.terminal_of(cyc[i]) == origin;
            c.in_origin += config_.terminal_of(cyc[(i + 1) % cyc.size()]) == origin;
        }
        config_.apply_cycle(cyc);
    }
}

void ChainSampler::run_block(std::size_t length) {
    const auto n_terminals = layout_.terminal_count();
    const std::size_t first = completed_;
    // recorded iterations are burn_in, burn_in + thin, ...
    auto recorded_before = [&](std::size_t it) {
        return it > plan_.burn_in ? (it - plan_.burn_in + plan_.thin - 1) / plan_.thin : std::size_t{0};
    };
    const std::size_t base = recorded_before(first);
    const std::size_t rows = recorded_before(first + length) - base;
    std::vector<MixingSums> sums(rows * n_terminals);
    std::vector<std::int64_t> retained(rows * parts_.size(), 0);

    auto run_part = [&](std::size_t ci) {
        auto& c = parts_[ci];
        for (std::size_t it = 0; it < length; ++it) {
            step(c);
            const std::size_t global = first + it;
            if (global < plan_.burn_in || (global - plan_.burn_in) % plan_.thin != 0) continue;
            const std::size_t row = (global - plan_.burn_in) / plan_.thin - base;
            for (Index t : c.terminals) sums[row * n_terminals + t] = config_.terminal_sums(t);
            retained[row * parts_.size() + ci] = c.in_origin;
        }
    };
    const bool serial = observer_ || plan_.check_invariants;
    if (serial) {
        // One iteration at a time so that checks and observers see every state.
        for (std::size_t ci = 0; ci < parts_.size(); ++ci) run_part(ci);
    } else {
        parallel_for(parts_.size(), plan_.threads, run_part);
    }

    const double n_auth = double(std::max<std::size_t>(1, corpus_->authorships().size()));
    for (std::size_t row = 0; row < rows; ++row) {
        for (std::size_t k = 0; k < fields_.size(); ++k) {
            MixingSums s;
            for (Index t : corpus_->terminals_under(fields_[k])) s += sums[row * n_terminals + t];
            traces_[k].push_back(s.alpha().value_or(kUndefinedAlpha));
        }
        std::int64_t kept = 0;
        for (std::size_t ci = 0; ci < parts_.size(); ++ci) kept += retained[row * parts_.size() + ci];
        origin_retention_sum_ += double(kept) / n_auth;
        ++recorded_;
    }
    completed_ += length;
}

void ChainSampler::advance(std::size_t iterations) {
    if (completed_ + iterations > plan_.iterations)
        throw Error("sampler", "cannot advance past the planned " + std::to_string(plan_.iterations) + " iterations");
    const bool serial = observer_ || plan_.check_invariants;
    while (iterations > 0) {
        const std::size_t length = serial ? 1 : std::min(iterations, kBlockLength);
        run_block(length);
        iterations -= length;
        if (plan_.check_invariants) config_.verify(*corpus_);
        if (observer_) observer_(completed_, config_);
    }
}

std::string ChainSampler::checkpoint() const {
    nlohmann::json header;
    header["plan"] = plan_.to_json();
    header["completed"] = completed_;
    header["authorships"] = config_.size();
    header["origin_retention_sum"] = origin_retention_sum_;
    header["recorded"] = recorded_;
    auto& parts = header["components"] = nlohmann::json::array();
    for (const auto& c : parts_) {
        parts.push_back({{"rng", c.rng.state()},
                         {"in_origin", c.in_origin},
                         {"proposals", c.counters.proposals},
                         {"accepted", c.counters.accepted},
                         {"zero_density", c.counters.zero_density}});
    }
    const std::string text = header.dump();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, kFormatVersion);
    put_u64(out, text.size());
    out += text;
    for (Index a = 0; a < config_.size(); ++a) put_u32(out, config_.slot_of(a));
    return out;
}

ChainSampler ChainSampler::restore(const Corpus& corpus, const SwapMatrix& matrix, ChainPlan plan,
                                   std::string_view blob) {
    ChainSampler s(corpus, matrix, std::move(plan));
    if (blob.size() < sizeof kCheckpointMagic || std::memcmp(blob.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw Error("sampler", "not a checkpoint file");
    std::size_t pos = sizeof kCheckpointMagic;
    if (get_u32(blob, pos, "checkpoint") != kFormatVersion) throw Error("sampler", "unsupported checkpoint version");
    const auto len = get_u64(blob, pos, "checkpoint");
    if (pos + len > blob.size()) throw Error("sampler", "checkpoint is truncated");
    const auto header = nlohmann::json::parse(blob.substr(pos, len));
    pos += len;

    const auto saved = ChainPlan::from_json(header.at("plan"));
    const auto& p = s.plan_;
    if (saved.seed != p.seed || saved.iterations != p.iterations || saved.burn_in != p.burn_in ||
        saved.thin != p.thin || saved.continue_prob != p.continue_prob || saved.tracked_fields != p.tracked_fields ||
        saved.proposals_per_iteration != p.proposals_per_iteration || saved.length_mode != p.length_mode)
        throw Error("sampler", "checkpoint was written by a different chain plan");
    if (header.at("authorships").get<std::size_t>() != s.config_.size())
        throw Error("sampler", "checkpoint does not match the corpus");
    const auto& parts = header.at("components");
    if (parts.size() != s.parts_.size()) throw Error("sampler", "checkpoint does not match the swap matrix");

    std::vector<std::uint32_t> slots(s.config_.size());
    for (auto& v : slots) v = get_u32(blob, pos, "checkpoint");
    s.config_.set_assignment(slots);
    for (std::size_t i = 0; i < s.parts_.size(); ++i) {
        auto& c = s.parts_[i];
        c.rng.set_state(parts[i].at("rng").get<std::string>());
        c.in_origin = parts[i].at("in_origin");
        c.counters.proposals = parts[i].at("proposals");
        c.counters.accepted = parts[i].at("accepted");
        c.counters.zero_density = parts[i].at("zero_density");
    }
    s.completed_ = header.at("completed");
    s.origin_retention_sum_ = header.at("origin_retention_sum");
    s.recorded_ = header.at("recorded");
    return s;
}

ChainRun ChainSampler::finish() {
    ChainRun run;
    run.plan = plan_;
    run.fields = fields_;
    run.traces = std::move(traces_);
    traces_.assign(fields_.size(), {});
    for (const auto& c : parts_) {
        run.counters.proposals += c.counters.proposals;
        run.counters.accepted += c.counters.accepted;
        run.counters.zero_density += c.counters.zero_density;
    }
    run.counters.origin_retention_sum = origin_retention_sum_;
    run.counters.recorded = recorded_;
    run.checkpoint = checkpoint();
    return run;
}

ChainRun run_chain(const Corpus& corpus, const SwapMatrix& matrix, const ChainPlan& plan) {
    ChainSampler sampler(corpus, matrix, plan);
    sampler.advance(plan.iterations);
    return sampler.finish();
}

// ------------------------------------------------------------- trace I/O

void write_trace_csv(const ChainRun& run, const Corpus& corpus, std::ostream& out) {
    out << "sample_index,field_id,alpha\n";
    for (std::size_t k = 0; k < run.fields.size(); ++k) {
        const auto& id = corpus.fields()[run.fields[k]].id;
        for (std::size_t i = 0; i < run.traces[k].size(); ++i) {
            const double v = run.traces[k][i];
            out << i << ',' << id << ',' << (std::isnan(v) ? std::string("NA") : detail::format_double(v)) << '\n';
        }
    }
}

void write_trace_binary(const ChainRun& run, const Corpus& corpus, std::ostream& out) {
    nlohmann::json header;
    header["plan"] = run.plan.to_json();
    auto& ids = header["fields"] = nlohmann::json::array();
    for (Index f : run.fields) ids.push_back(corpus.fields()[f].id);
    header["samples"] = run.traces.empty() ? 0 : run.traces.front().size();
    header["counters"] = {{"proposals", run.counters.proposals},
                          {"accepted", run.counters.accepted},
                          {"zero_density", run.counters.zero_density},
                          {"origin_retention_sum", run.counters.origin_retention_sum},
                          {"recorded", run.counters.recorded}};
    const std::string text = header.dump();
    std::string buf(kTraceMagic, sizeof kTraceMagic);
    put_u32(buf, kFormatVersion);
    put_u64(buf, text.size());
    buf += text;
    for (const auto& trace : run.traces)
        for (double v : trace) put_u64(buf, std::bit_cast<std::uint64_t>(v));
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw Error("sampler", "failed to write trace");
}

ChainRun read_trace_binary(std::istream& in, const Corpus& corpus) {
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < sizeof kTraceMagic || std::memcmp(blob.data(), kTraceMagic, sizeof kTraceMagic) != 0)
        throw Error("sampler", "not a trace file");
    std::size_t pos = sizeof kTraceMagic;
    if (get_u32(blob, pos, "trace") != kFormatVersion) throw Error("sampler", "unsupported trace version");
    const auto len = get_u64(blob, pos, "trace");
    if (pos + len > blob.size()) throw Error("sampler", "trace is truncated");
    const auto header = nlohmann::json::parse(std::string_view(blob).substr(pos, len));
    pos += len;

    ChainRun run;
    run.plan = ChainPlan::from_json(header.at("plan"));
    for (const auto& id : header.at("fields")) run.fields.push_back(corpus.field_index(id.get<std::string>()));
    const std::size_t samples = header.at("samples");
    const auto& c = header.at("counters");
    run.counters.proposals = c.at("proposals");
    run.counters.accepted = c.at("accepted");
    run.counters.zero_density = c.at("zero_density");
    run.counters.origin_retention_sum = c.at("origin_retention_sum");
    run.counters.recorded = c.at("recorded");
    run.traces.resize(run.fields.size());
    for (auto& trace : run.traces) {
        trace.resize(samples);
        for (auto& v : trace) v = std::bit_cast<double>(get_u64(blob, pos, "trace"));
    }
    return run;
}

}  // namespace homophily
