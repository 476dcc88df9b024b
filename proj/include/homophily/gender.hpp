#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "homophily/corpus.hpp"

namespace homophily {

/// Lowercases, folds common Latin diacritics to ASCII and drops punctuation
/// other than hyphens and spaces. Runs of separators collapse to one space
/// or hyphen; leading and trailing separators are trimmed.
std::string normalize_name(std::string_view raw);

/// Splits a normalized name on hyphens and spaces.
std::vector<std::string> name_parts(std::string_view normalized);

struct NameCounts {
    std::uint64_t female = 0;
    std::uint64_t male = 0;
};

/// Source of name-gender frequencies. The shipped implementation is a local
/// table; a remote lookup service can implement the same interface.
class GenderProvider {
public:
    virtual ~GenderProvider() = default;
    /// `normalized` has already passed through normalize_name().
    virtual std::optional<NameCounts> lookup(std::string_view normalized) const = 0;
    virtual std::string name() const = 0;
    /// Lower values are consulted first.
    virtual int priority() const = 0;
};

class NameFrequencyTable final : public GenderProvider {
public:
    NameFrequencyTable(std::string name, int priority) : name_(std::move(name)), priority_(priority) {}

    /// Rows: name, female_count, male_count. Duplicate names (after
    /// normalization) accumulate.
    static NameFrequencyTable load(std::istream& in, std::string name, int priority);
    static NameFrequencyTable load(const std::filesystem::path& path, int priority);

    void add(std::string_view raw_name, std::uint64_t female, std::uint64_t male);

    std::optional<NameCounts> lookup(std::string_view normalized) const override;
    std::string name() const override { return name_; }
    int priority() const override { return priority_; }
    std::size_t size() const noexcept { return counts_.size(); }

private:
    std::string name_;
    int priority_;
    std::unordered_map<std::string, NameCounts> counts_;
};

struct ImputationReport {
    struct Source {
        std::string name;
        std::size_t imputed = 0;
    };
    std::size_t total = 0;
    std::size_t preassigned = 0;       // gender came from the input file
    std::vector<Source> per_source;    // in consultation order
    std::size_t not_found = 0;         // absent from every table
    std::size_t ambiguous = 0;         // present somewhere, never over threshold
    std::size_t conflicting_parts = 0; // double name resolving to both genders

    double rate(std::size_t count) const { return total ? double(count) / double(total) : 0.0; }
    nlohmann::json to_json() const;
};

struct ImputationResult {
    Corpus corpus;
    ImputationReport report;
};

/// Outcome of resolving one name against the ordered providers.
struct NameResolution {
    Gender gender = Gender::Unassigned;
    std::optional<std::size_t> source;  // index into the ordered provider list
    bool found = false;
    bool conflict = false;
};

/// Providers are consulted in priority order; the first one that resolves the
/// full name, or exactly one gender across its parts, decides. A name whose
/// parts resolve to both genders in the same provider stays Unassigned.
NameResolution resolve_name(std::string_view raw_name, std::span<const GenderProvider* const> ordered,
                            double threshold);

/// Sets gender for Unassigned authorships; genders already present are kept.
ImputationResult impute_gender(const Corpus& corpus, std::span<const GenderProvider* const> providers,
                               double threshold = 0.95);

}  // namespace homophily
