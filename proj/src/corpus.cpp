#include "homophily/corpus.hpp"

#include <algorithm>
#include <climits>
#include <fstream>
#include <unordered_set>

#include "homophily/error.hpp"
#include "tsv.hpp"

namespace homophily {

namespace {

[[noreturn]] void corpus_error(const std::string& what) { throw Error("corpus", what); }

std::string quote_id(std::string_view s) { return "'" + std::string(s) + "'"; }

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

char gender_code(Gender g) noexcept {
    switch (g) {
        case Gender::Female: return 'F';
        case Gender::Male: return 'M';
        case Gender::Unassigned: return 'U';
    }
    return 'U';
}

std::optional<Gender> parse_gender(std::string_view t) noexcept {
    std::string s;
    for (char c : t) {
        if (c != ' ') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (s.empty() || s == "u" || s == "na" || s == "unassigned") return Gender::Unassigned;
    if (s == "f" || s == "female") return Gender::Female;
    if (s == "m" || s == "male") return Gender::Male;
    return std::nullopt;
}

std::string_view level_name(LevelTag tag) noexcept {
    switch (tag) {
        case LevelTag::Root: return "root";
        case LevelTag::Top: return "top";
        case LevelTag::Composite: return "composite";
        case LevelTag::Terminal: return "terminal";
    }
    return "?";
}

nlohmann::json IngestReport::to_json() const {
    return {{"field_rows", field_rows},
            {"paper_rows", paper_rows},
            {"papers_kept", papers_kept},
            {"papers_out_of_window", papers_out_of_window},
            {"authorship_rows", authorship_rows},
            {"authorships_kept", authorships_kept},
            {"authorships_of_excluded_papers", authorships_of_excluded_papers},
            {"authorships_with_direct_gender", authorships_with_direct_gender},
            {"flow_rows", flow_rows},
            {"excluded_paper_ids", excluded_paper_ids}};
}

double CleaningRow::prop_unassigned() const { return ratio(unassigned, authorships_before); }
double CleaningRow::prop_authorships_lost() const {
    return 1.0 - ratio(authorships_remaining, authorships_before);
}
double CleaningRow::prop_papers_lost() const { return 1.0 - ratio(papers_remaining, papers_before); }

nlohmann::json CleaningStats::to_json() const {
    auto row = [](const CleaningRow& r) {
        return nlohmann::json{{"field", r.field_id},
                              {"authorships_before", r.authorships_before},
                              {"unassigned", r.unassigned},
                              {"prop_unassigned", r.prop_unassigned()},
                              {"authorships_remaining", r.authorships_remaining},
                              {"prop_authorships_lost", r.prop_authorships_lost()},
                              {"papers_before", r.papers_before},
                              {"papers_remaining", r.papers_remaining},
                              {"prop_papers_lost", r.prop_papers_lost()}};
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : per_top_field) rows.push_back(row(r));
    return {{"per_top_field", rows},
            {"total", row(total)},
            {"solo_papers_removed", solo_papers_removed},
            {"empty_result", empty_result}};
}

nlohmann::json Provenance::to_json() const {
    return {{"papers_before_cleaning", papers_before_cleaning},
            {"authorships_before_cleaning", authorships_before_cleaning},
            {"papers_after_cleaning", papers_after_cleaning},
            {"authorships_after_cleaning", authorships_after_cleaning},
            {"cleaned", cleaned}};
}

Provenance Provenance::from_json(const nlohmann::json& j) {
    Provenance p;
    p.papers_before_cleaning = j.value("papers_before_cleaning", std::size_t{0});
    p.authorships_before_cleaning = j.value("authorships_before_cleaning", std::size_t{0});
    p.papers_after_cleaning = j.value("papers_after_cleaning", std::size_t{0});
    p.authorships_after_cleaning = j.value("authorships_after_cleaning", std::size_t{0});
    p.cleaned = j.value("cleaned", false);
    return p;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus() : Corpus({FieldNode{std::string(kRootFieldId), std::nullopt, 0, {}}}, {}, {}, {}) {}

Corpus::Corpus(std::vector<FieldNode> fields, std::vector<Paper> papers,
               std::vector<Authorship> authorships, std::vector<CitationFlow> flows,
               Provenance provenance)
    : fields_(std::move(fields)),
      papers_(std::move(papers)),
      authorships_(std::move(authorships)),
      flows_(std::move(flows)),
      provenance_(provenance) {
    build_indexes();
}

void Corpus::build_indexes() {
    if (fields_.empty() || fields_[0].parent || fields_[0].level != 0)
        corpus_error("field 0 must be the synthetic root at level 0");
    const auto n = static_cast<Index>(fields_.size());
    for (auto& f : fields_) f.children.clear();
    field_lookup_.clear();
    for (Index i = 0; i < n; ++i) {
        auto& f = fields_[i];
        if (!field_lookup_.emplace(f.id, i).second) corpus_error("duplicate field id " + quote_id(f.id));
        if (i == 0) continue;
        if (!f.parent || *f.parent >= n) corpus_error("field " + quote_id(f.id) + " has no valid parent");
        const auto& parent = fields_[*f.parent];
        if (f.level != parent.level + 1)
            corpus_error("field " + quote_id(f.id) + " has level " + std::to_string(f.level) +
                         " but its parent has level " + std::to_string(parent.level));
        fields_[*f.parent].children.push_back(i);
    }

    max_depth_ = 0;
    terminals_.clear();
    terminal_of_field_.assign(n, std::nullopt);
    for (Index i = 1; i < n; ++i) {
        max_depth_ = std::max(max_depth_, fields_[i].level);
        if (fields_[i].children.empty()) {
            terminal_of_field_[i] = static_cast<Index>(terminals_.size());
            terminals_.push_back(i);
        }
    }
    terminals_under_.assign(n, {});
    for (Index t = 0; t < terminals_.size(); ++t) {
        std::optional<Index> f = terminals_[t];
        while (f) {
            terminals_under_[*f].push_back(t);
            f = fields_[*f].parent;
        }
    }

    papers_by_terminal_.assign(terminals_.size(), {});
    for (Index p = 0; p < papers_.size(); ++p) {
        const auto& paper = papers_[p];
        if (paper.field >= n) corpus_error("paper " + quote_id(paper.id) + " references an unknown field");
        auto t = terminal_of_field_[paper.field];
        if (!t) corpus_error("paper " + quote_id(paper.id) + " is assigned to non-terminal field " +
                             quote_id(fields_[paper.field].id));
        papers_by_terminal_[*t].push_back(p);
        for (Index a : paper.authorships) {
            if (a >= authorships_.size() || authorships_[a].paper != p)
                corpus_error("paper " + quote_id(paper.id) + " lists an authorship it does not own");
        }
    }
    std::vector<std::size_t> listed(papers_.size(), 0);
    for (const auto& a : authorships_) {
        if (a.paper >= papers_.size()) corpus_error("authorship " + quote_id(a.id) + " references an unknown paper");
        ++listed[a.paper];
    }
    for (Index p = 0; p < papers_.size(); ++p) {
        if (listed[p] != papers_[p].authorships.size())
            corpus_error("paper " + quote_id(papers_[p].id) + " authorship list is inconsistent");
    }
    for (const auto& fl : flows_) {
        if (fl.from >= n || fl.to >= n || !terminal_of_field_[fl.from] || !terminal_of_field_[fl.to])
            corpus_error("citation flows must connect terminal fields");
    }
}

std::optional<Index> Corpus::find_field(std::string_view id) const {
    auto it = field_lookup_.find(std::string(id));
    if (it == field_lookup_.end()) return std::nullopt;
    return it->second;
}

Index Corpus::field_index(std::string_view id) const {
    auto f = find_field(id);
    if (!f) corpus_error("unknown field " + quote_id(id));
    return *f;
}

LevelTag Corpus::level_tag(Index field) const {
    if (field == root()) return LevelTag::Root;
    if (fields_[field].level == 1) return LevelTag::Top;
    if (fields_[field].children.empty()) return LevelTag::Terminal;
    return LevelTag::Composite;
}

std::optional<Index> Corpus::terminal_index(Index field) const { return terminal_of_field_.at(field); }

std::vector<Index> Corpus::papers_under(Index field) const {
    std::vector<Index> out;
    for (Index t : terminals_under_.at(field)) {
        const auto& ps = papers_by_terminal_[t];
        out.insert(out.end(), ps.begin(), ps.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Index> Corpus::ancestors(Index field) const {
    std::vector<Index> out;
    auto f = fields_.at(field).parent;
    while (f) {
        out.push_back(*f);
        f = fields_[*f].parent;
    }
    return out;
}

std::optional<Index> Corpus::top_level_of(Index field) const {
    if (field == root()) return std::nullopt;
    while (fields_[field].level > 1) field = *fields_[field].parent;
    return field;
}

std::size_t Corpus::count_gender(Gender g) const {
    return static_cast<std::size_t>(std::count_if(authorships_.begin(), authorships_.end(),
                                                  [g](const Authorship& a) { return a.gender == g; }));
}

Corpus Corpus::with_genders(std::span<const Gender> genders) const {
    if (genders.size() != authorships_.size()) corpus_error("gender vector size mismatch");
    auto auths = authorships_;
    for (std::size_t i = 0; i < auths.size(); ++i) auths[i].gender = genders[i];
    return Corpus(fields_, papers_, std::move(auths), flows_, provenance_);
}

Corpus Corpus::with_provenance(Provenance p) const {
    Corpus c = *this;
    c.provenance_ = p;
    return c;
}

bool Corpus::operator==(const Corpus& o) const {
    return fields_ == o.fields_ && papers_ == o.papers_ && authorships_ == o.authorships_ &&
           flows_ == o.flows_;
}

// ---------------------------------------------------------------------------
// Ingestion

IngestResult ingest_corpus(std::istream& papers_in, std::istream& auth_in, std::istream& hier_in,
                           std::istream* flows_in, const IngestConfig& config) {
    IngestReport report;
    std::vector<std::string_view> cells;

    // Hierarchy: rows may list children before parents, so resolve in two passes.
    struct RawField {
        std::string id;
        std::string parent;
        int level;
        std::size_t line;
    };
    std::vector<RawField> raw_fields;
    detail::TsvReader hier(hier_in, "hierarchy", "field_id");
    while (hier.next(cells)) {
        if (cells.size() != 3) hier.fail("corpus", "expected 3 columns, found " + std::to_string(cells.size()));
        int level = 0;
        if (!detail::parse_number(cells[2], level)) hier.fail("corpus", "malformed level " + quote_id(cells[2]));
        std::string parent(cells[1]);
        if (parent == "NULL" || parent == "null") parent.clear();
        if (cells[0].empty()) hier.fail("corpus", "empty field id");
        if (cells[0] == kRootFieldId) hier.fail("corpus", "field id " + quote_id(kRootFieldId) + " is reserved");
        raw_fields.push_back({std::string(cells[0]), parent, level, hier.line()});
    }
    report.field_rows = raw_fields.size();

    std::vector<FieldNode> fields;
    fields.push_back({std::string(kRootFieldId), std::nullopt, 0, {}});
    std::unordered_map<std::string, Index> field_ids;
    for (const auto& rf : raw_fields) {
        if (!field_ids.emplace(rf.id, static_cast<Index>(fields.size())).second)
            throw Error("corpus", "hierarchy:" + std::to_string(rf.line) + ": duplicate field id " + quote_id(rf.id));
        fields.push_back({rf.id, std::nullopt, rf.level, {}});
    }
    for (std::size_t i = 0; i < raw_fields.size(); ++i) {
        const auto& rf = raw_fields[i];
        auto& node = fields[i + 1];
        auto where = "hierarchy:" + std::to_string(rf.line) + ": ";
        if (rf.parent.empty()) {
            node.parent = Corpus::root();
            if (rf.level != 1) throw Error("corpus", where + "top-level field " + quote_id(rf.id) + " must have level 1");
        } else {
            auto it = field_ids.find(rf.parent);
            if (it == field_ids.end()) throw Error("corpus", where + "unknown parent field " + quote_id(rf.parent));
            node.parent = it->second;
        }
        if (rf.level < 1 || rf.level > config.max_depth)
            throw Error("corpus", where + "level " + std::to_string(rf.level) + " outside [1, " +
                                      std::to_string(config.max_depth) + "]");
    }
    for (std::size_t i = 0; i < raw_fields.size(); ++i) {
        const auto& node = fields[i + 1];
        const auto& parent = fields[*node.parent];
        if (node.level != parent.level + 1)
            throw Error("corpus", "hierarchy:" + std::to_string(raw_fields[i].line) + ": level of " +
                                      quote_id(node.id) + " must be one more than its parent's");
    }
    std::vector<bool> has_children(fields.size(), false);
    for (const auto& f : fields)
        if (f.parent) has_children[*f.parent] = true;

    // Papers.
    std::vector<Paper> papers;
    std::unordered_map<std::string, Index> paper_ids;
    std::unordered_set<std::string> excluded;
    detail::TsvReader pr(papers_in, "papers", "paper_id");
    while (pr.next(cells)) {
        ++report.paper_rows;
        if (cells.size() != 3) pr.fail("corpus", "expected 3 columns, found " + std::to_string(cells.size()));
        std::string id(cells[0]);
        if (id.empty()) pr.fail("corpus", "empty paper id");
        auto fit = field_ids.find(std::string(cells[1]));
        if (fit == field_ids.end()) pr.fail("corpus", "unknown field " + quote_id(cells[1]));
        if (has_children[fit->second]) pr.fail("corpus", "field " + quote_id(cells[1]) + " is not a terminal field");
        int year = 0;
        if (!detail::parse_number(cells[2], year)) pr.fail("corpus", "malformed year " + quote_id(cells[2]));
        if (paper_ids.count(id) || excluded.count(id)) pr.fail("corpus", "duplicate paper id " + quote_id(id));
        if (year < config.year_min || year > config.year_max) {
            excluded.insert(id);
            report.excluded_paper_ids.push_back(id);
            ++report.papers_out_of_window;
            continue;
        }
        paper_ids.emplace(id, static_cast<Index>(papers.size()));
        papers.push_back({id, fit->second, year, {}});
    }
    report.papers_kept = papers.size();

    // Authorships.
    std::vector<Authorship> auths;
    std::unordered_set<std::string> auth_ids;
    detail::TsvReader ar(auth_in, "authorships", "authorship_id");
    while (ar.next(cells)) {
        ++report.authorship_rows;
        if (cells.size() != 3 && cells.size() != 4)
            ar.fail("corpus", "expected 3 or 4 columns, found " + std::to_string(cells.size()));
        std::string id(cells[0]);
        if (id.empty()) ar.fail("corpus", "empty authorship id");
        if (!auth_ids.insert(id).second) ar.fail("corpus", "duplicate authorship id " + quote_id(id));
        std::string pid(cells[1]);
        auto pit = paper_ids.find(pid);
        if (pit == paper_ids.end()) {
            if (excluded.count(pid)) {
                ++report.authorships_of_excluded_papers;
                continue;
            }
            ar.fail("corpus", "unknown paper " + quote_id(pid));
        }
        Gender g = Gender::Unassigned;
        if (cells.size() == 4) {
            auto pg = parse_gender(cells[3]);
            if (!pg) ar.fail("corpus", "malformed gender " + quote_id(cells[3]));
            g = *pg;
            if (g != Gender::Unassigned) ++report.authorships_with_direct_gender;
        }
        auto idx = static_cast<Index>(auths.size());
        auths.push_back({id, pit->second, std::string(cells[2]), g});
        papers[pit->second].authorships.push_back(idx);
    }
    report.authorships_kept = auths.size();

    // Flows.
    std::vector<CitationFlow> flows;
    if (flows_in) {
        detail::TsvReader fr(*flows_in, "flows", "from_field_id");
        while (fr.next(cells)) {
            ++report.flow_rows;
            if (cells.size() != 3) fr.fail("corpus", "expected 3 columns, found " + std::to_string(cells.size()));
            auto from = field_ids.find(std::string(cells[0]));
            auto to = field_ids.find(std::string(cells[1]));
            if (from == field_ids.end()) fr.fail("corpus", "unknown field " + quote_id(cells[0]));
            if (to == field_ids.end()) fr.fail("corpus", "unknown field " + quote_id(cells[1]));
            if (has_children[from->second] || has_children[to->second])
                fr.fail("corpus", "flows must connect terminal fields");
            double prop = 0;
            if (!detail::parse_number(cells[2], prop)) fr.fail("corpus", "malformed proportion " + quote_id(cells[2]));
            flows.push_back({from->second, to->second, prop});
        }
    }

    Provenance prov;
    prov.papers_before_cleaning = papers.size();
    prov.authorships_before_cleaning = auths.size();
    Corpus corpus(std::move(fields), std::move(papers), std::move(auths), std::move(flows), prov);
    return {std::move(corpus), std::move(report)};
}

IngestResult ingest_corpus(const CorpusFiles& files, const IngestConfig& config) {
    auto open = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        if (!in) throw Error("corpus", "cannot open " + p.string());
        return in;
    };
    auto papers = open(files.papers);
    auto auths = open(files.authorships);
    auto hier = open(files.hierarchy);
    std::ifstream flows;
    if (files.flows) flows = open(*files.flows);
    return ingest_corpus(papers, auths, hier, files.flows ? &flows : nullptr, config);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw Error("corpus", "cannot write " + (dir / name).string());
        return out;
    };
    const auto& fields = corpus.fields();
    {
        auto out = open("hierarchy.tsv");
        out << "field_id\tparent_id\tlevel\n";
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto& f = fields[i];
            out << f.id << '\t' << (*f.parent == Corpus::root() ? "NULL" : fields[*f.parent].id) << '\t'
                << f.level << '\n';
        }
    }
    {
        auto out = open("papers.tsv");
        out << "paper_id\tterminal_field_id\tyear\n";
        for (const auto& p : corpus.papers()) out << p.id << '\t' << fields[p.field].id << '\t' << p.year << '\n';
    }
    {
        auto out = open("authorships.tsv");
        out << "authorship_id\tpaper_id\tfirst_name\tgender\n";
        for (const auto& a : corpus.authorships())
            out << a.id << '\t' << corpus.papers()[a.paper].id << '\t' << a.first_name << '\t'
                << gender_code(a.gender) << '\n';
    }
    {
        auto out = open("flows.tsv");
        out << "from_field_id\tto_field_id\tproportion\n";
        for (const auto& f : corpus.flows())
            out << fields[f.from].id << '\t' << fields[f.to].id << '\t' << detail::format_double(f.proportion)
                << '\n';
    }
    {
        auto out = open("provenance.json");
        out << corpus.provenance().to_json().dump(2) << '\n';
    }
}

Corpus load_corpus(const std::filesystem::path& dir) {
    CorpusFiles files{dir / "papers.tsv", dir / "authorships.tsv", dir / "hierarchy.tsv", dir / "flows.tsv"};
    if (!std::filesystem::exists(*files.flows)) files.flows.reset();
    IngestConfig cfg;
    cfg.year_min = INT_MIN;
    cfg.year_max = INT_MAX;
    cfg.max_depth = INT_MAX;
    auto result = ingest_corpus(files, cfg);
    std::ifstream prov(dir / "provenance.json");
    if (prov) return result.corpus.with_provenance(Provenance::from_json(nlohmann::json::parse(prov)));
    return result.corpus;
}

// ---------------------------------------------------------------------------
// Cleaning

CleaningResult clean_corpus(const Corpus& corpus) {
    const auto& fields = corpus.fields();
    const auto& papers = corpus.papers();
    const auto& auths = corpus.authorships();

    CleaningStats stats;
    std::unordered_map<Index, std::size_t> top_row;
    for (Index c : fields[Corpus::root()].children) {
        top_row.emplace(c, stats.per_top_field.size());
        stats.per_top_field.push_back({fields[c].id});
    }
    stats.total.field_id = std::string(kRootFieldId);

    std::vector<Paper> kept_papers;
    std::vector<Authorship> kept_auths;
    for (const auto& paper : papers) {
        std::vector<Index> gendered;
        for (Index a : paper.authorships)
            if (auths[a].gender != Gender::Unassigned) gendered.push_back(a);
        const bool multi = paper.authorships.size() >= 2;
        const bool keep = gendered.size() >= 2;
        if (multi) {
            auto& row = stats.per_top_field[top_row.at(*corpus.top_level_of(paper.field))];
            for (auto* r : {&row, &stats.total}) {
                r->authorships_before += paper.authorships.size();
                r->unassigned += paper.authorships.size() - gendered.size();
                r->papers_before += 1;
                if (keep) {
                    r->authorships_remaining += gendered.size();
                    r->papers_remaining += 1;
                }
            }
        } else {
            ++stats.solo_papers_removed;
        }
        if (!keep) continue;
        Paper np{paper.id, paper.field, paper.year, {}};
        auto pidx = static_cast<Index>(kept_papers.size());
        for (Index a : gendered) {
            np.authorships.push_back(static_cast<Index>(kept_auths.size()));
            auto na = auths[a];
            na.paper = pidx;
            kept_auths.push_back(std::move(na));
        }
        kept_papers.push_back(std::move(np));
    }
    stats.empty_result = kept_papers.empty();

    Provenance prov = corpus.provenance();
    if (!prov.cleaned) {
        prov.papers_before_cleaning = papers.size();
        prov.authorships_before_cleaning = auths.size();
    }
    prov.papers_after_cleaning = kept_papers.size();
    prov.authorships_after_cleaning = kept_auths.size();
    prov.cleaned = true;
    Corpus cleaned(fields, std::move(kept_papers), std::move(kept_auths), corpus.flows(), prov);
    return {std::move(cleaned), std::move(stats)};
}

CorpusBuilder::CorpusBuilder() { fields_.push_back(FieldNode{std::string(kRootFieldId), std::nullopt, 0, {}}); }

Index CorpusBuilder::add_field(std::string id, std::optional<Index> parent) {
    const Index p = parent.value_or(Corpus::root());
    if (p >= fields_.size()) corpus_error("unknown parent field index " + std::to_string(p));
    fields_.push_back(FieldNode{std::move(id), p, fields_[p].level + 1, {}});
    return static_cast<Index>(fields_.size() - 1);
}

Index CorpusBuilder::add_paper(Index field, std::span<const Gender> genders, int year, std::string id) {
    if (field >= fields_.size()) corpus_error("unknown field index " + std::to_string(field));
    const auto index = static_cast<Index>(papers_.size());
    Paper paper{id.empty() ? "P" + std::to_string(index) : std::move(id), field, year, {}};
    for (std::size_t k = 0; k < genders.size(); ++k) {
        paper.authorships.push_back(static_cast<Index>(authorships_.size()));
        authorships_.push_back(Authorship{paper.id + "." + std::to_string(k), index, {}, genders[k]});
    }
    papers_.push_back(std::move(paper));
    return index;
}

void CorpusBuilder::add_flow(Index from, Index to, double proportion) { flows_.push_back({from, to, proportion}); }

Corpus CorpusBuilder::build() const { return Corpus(fields_, papers_, authorships_, flows_); }

}  // namespace homophily
