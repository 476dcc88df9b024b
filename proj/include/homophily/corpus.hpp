#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace homophily {

using Index = std::uint32_t;

enum class Gender : std::uint8_t { Female, Male, Unassigned };

char gender_code(Gender g) noexcept;
/// Accepts F/M/U (any case), female/male, or an empty string (Unassigned).
std::optional<Gender> parse_gender(std::string_view text) noexcept;

struct Authorship {
    std::string id;
    Index paper = 0;
    std::string first_name;
    Gender gender = Gender::Unassigned;

    bool operator==(const Authorship&) const = default;
};

struct Paper {
    std::string id;
    Index field = 0;  // always a leaf of the hierarchy
    int year = 0;
    std::vector<Index> authorships;

    bool operator==(const Paper&) const = default;
};

struct FieldNode {
    std::string id;
    std::optional<Index> parent;
    int level = 0;  // 0 is the synthetic all-corpus root
    std::vector<Index> children;

    bool operator==(const FieldNode&) const = default;
};

/// Outgoing-citation proportion between two terminal fields.
struct CitationFlow {
    Index from = 0;
    Index to = 0;
    double proportion = 0.0;

    bool operator==(const CitationFlow&) const = default;
};

enum class LevelTag { Root, Top, Composite, Terminal };
std::string_view level_name(LevelTag tag) noexcept;

/// Identifier reserved for the synthetic root that spans the whole corpus.
inline constexpr std::string_view kRootFieldId = "ALL";

struct IngestConfig {
    int year_min = 1960;
    int year_max = 2011;  // inclusive
    int max_depth = 6;
};

struct IngestReport {
    std::size_t field_rows = 0;
    std::size_t paper_rows = 0;
    std::size_t papers_kept = 0;
    std::size_t papers_out_of_window = 0;
    std::size_t authorship_rows = 0;
    std::size_t authorships_kept = 0;
    std::size_t authorships_of_excluded_papers = 0;
    std::size_t flow_rows = 0;
    std::size_t authorships_with_direct_gender = 0;
    std::vector<std::string> excluded_paper_ids;

    nlohmann::json to_json() const;
};

/// Row of the cleaning report. Denominators count multi-author papers only.
struct CleaningRow {
    std::string field_id;
    std::size_t authorships_before = 0;
    std::size_t unassigned = 0;
    std::size_t authorships_remaining = 0;
    std::size_t papers_before = 0;
    std::size_t papers_remaining = 0;

    double prop_unassigned() const;
    double prop_authorships_lost() const;
    double prop_papers_lost() const;
};

struct CleaningStats {
    std::vector<CleaningRow> per_top_field;
    CleaningRow total;
    std::size_t solo_papers_removed = 0;
    bool empty_result = false;

    nlohmann::json to_json() const;
};

struct Provenance {
    std::size_t papers_before_cleaning = 0;
    std::size_t authorships_before_cleaning = 0;
    std::size_t papers_after_cleaning = 0;
    std::size_t authorships_after_cleaning = 0;
    bool cleaned = false;

    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& j);
};

/// Immutable, referentially closed corpus. Field 0 is the synthetic root; its
/// children are the top-level fields.
class Corpus {
public:
    Corpus();
    /// Validates closure and builds the derived hierarchy indexes. `fields`
    /// must start with the root node.
    Corpus(std::vector<FieldNode> fields, std::vector<Paper> papers,
           std::vector<Authorship> authorships, std::vector<CitationFlow> flows,
           Provenance provenance = {});

    const std::vector<FieldNode>& fields() const noexcept { return fields_; }
    const std::vector<Paper>& papers() const noexcept { return papers_; }
    const std::vector<Authorship>& authorships() const noexcept { return authorships_; }
    const std::vector<CitationFlow>& flows() const noexcept { return flows_; }
    const Provenance& provenance() const noexcept { return provenance_; }

    static constexpr Index root() noexcept { return 0; }
    std::optional<Index> find_field(std::string_view id) const;
    Index field_index(std::string_view id) const;  // throws on unknown

    bool is_leaf(Index field) const { return fields_[field].children.empty() && field != root(); }
    LevelTag level_tag(Index field) const;
    int max_depth() const noexcept { return max_depth_; }

    /// Leaves, in field-index order; a terminal index is a position here.
    const std::vector<Index>& terminal_fields() const noexcept { return terminals_; }
    std::optional<Index> terminal_index(Index field) const;
    /// Terminal indices under `field` (itself, for a leaf).
    const std::vector<Index>& terminals_under(Index field) const { return terminals_under_[field]; }
    /// Papers whose terminal field lies under `field`.
    std::vector<Index> papers_under(Index field) const;
    /// Ancestors from the parent upwards, ending at the root.
    std::vector<Index> ancestors(Index field) const;
    /// Top-level field containing `field` (nullopt for the root).
    std::optional<Index> top_level_of(Index field) const;

    std::size_t count_gender(Gender g) const;

    /// Same structure with every authorship's gender replaced.
    Corpus with_genders(std::span<const Gender> genders) const;
    Corpus with_provenance(Provenance p) const;

    /// Content equality; provenance metadata is ignored.
    bool operator==(const Corpus& other) const;

private:
    void build_indexes();

    std::vector<FieldNode> fields_;
    std::vector<Paper> papers_;
    std::vector<Authorship> authorships_;
    std::vector<CitationFlow> flows_;
    Provenance provenance_;

    std::unordered_map<std::string, Index> field_lookup_;
    std::vector<Index> terminals_;
    std::vector<std::optional<Index>> terminal_of_field_;
    std::vector<std::vector<Index>> terminals_under_;
    std::vector<std::vector<Index>> papers_by_terminal_;
    int max_depth_ = 0;
};

/// Incremental construction of small in-memory corpora (synthetic data,
/// fixtures, bindings).
class CorpusBuilder {
public:
    CorpusBuilder();

    /// A field without a parent hangs off the root as a top-level field.
    Index add_field(std::string id, std::optional<Index> parent = std::nullopt);
    Index add_paper(Index field, std::span<const Gender> genders, int year = 2000, std::string id = {});
    Index add_paper(Index field, std::initializer_list<Gender> genders, int year = 2000, std::string id = {}) {
        return add_paper(field, std::span<const Gender>(genders.begin(), genders.size()), year, std::move(id));
    }
    void add_flow(Index from, Index to, double proportion);
    Corpus build() const;

private:
    std::vector<FieldNode> fields_;
    std::vector<Paper> papers_;
    std::vector<Authorship> authorships_;
    std::vector<CitationFlow> flows_;
};

struct CorpusFiles {
    std::filesystem::path papers;
    std::filesystem::path authorships;
    std::filesystem::path hierarchy;
    std::optional<std::filesystem::path> flows;
};

struct IngestResult {
    Corpus corpus;
    IngestReport report;
};

IngestResult ingest_corpus(const CorpusFiles& files, const IngestConfig& config = {});
IngestResult ingest_corpus(std::istream& papers, std::istream& authorships, std::istream& hierarchy,
                           std::istream* flows, const IngestConfig& config = {});

/// Writes papers.tsv, authorships.tsv, hierarchy.tsv, flows.tsv and
/// provenance.json into `dir`; `load_corpus` reads them back.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

struct CleaningResult {
    Corpus corpus;
    CleaningStats stats;
};

/// Drops Unassigned authorships, then papers left with fewer than two.
CleaningResult clean_corpus(const Corpus& corpus);

}  // namespace homophily
