#include "homophily/gender.hpp"

#include <algorithm>
#include <fstream>

#include "homophily/error.hpp"
#include "tsv.hpp"

namespace homophily {

namespace {

// Latin-1 Supplement U+00C0..U+00FF folded to lowercase ASCII; '?' marks
// code points handled separately.
constexpr std::string_view kLatin1Fold =
    "aaaaaa?ceeeeiiiidnooooo?ouuuuy??"
    "aaaaaa?ceeeeiiiidnooooo?ouuuuy?y";

std::string_view fold_codepoint(char32_t cp, char (&one)[2]) {
    auto single = [&](char c) {
        one[0] = c;
        one[1] = '\0';
        return std::string_view(one, 1);
    };
    if (cp >= 0xC0 && cp <= 0xFF) {
        switch (cp) {
            case 0xC6: case 0xE6: return "ae";
            case 0xDE: case 0xFE: return "th";
            case 0xDF: return "ss";
            case 0xD7: case 0xF7: return "";
            default: return single(kLatin1Fold[cp - 0xC0]);
        }
    }
    struct Range {
        char32_t lo, hi;
        std::string_view to;
    };
    static constexpr Range kExtA[] = {
        {0x100, 0x105, "a"}, {0x106, 0x10D, "c"}, {0x10E, 0x111, "d"}, {0x112, 0x11B, "e"},
        {0x11C, 0x123, "g"}, {0x124, 0x127, "h"}, {0x128, 0x131, "i"}, {0x132, 0x133, "ij"},
        {0x134, 0x135, "j"}, {0x136, 0x138, "k"}, {0x139, 0x142, "l"}, {0x143, 0x14B, "n"},
        {0x14C, 0x151, "o"}, {0x152, 0x153, "oe"}, {0x154, 0x159, "r"}, {0x15A, 0x161, "s"},
        {0x162, 0x167, "t"}, {0x168, 0x173, "u"}, {0x174, 0x175, "w"}, {0x176, 0x178, "y"},
        {0x179, 0x17E, "z"}, {0x17F, 0x17F, "s"},
    };
    for (const auto& r : kExtA)
        if (cp >= r.lo && cp <= r.hi) return r.to;
    return {};
}

}  // namespace

std::string normalize_name(std::string_view raw) {
    std::string out;
    char pending = 0;  // separator waiting for the next letter
    auto emit = [&](std::string_view s) {
        if (s.empty()) return;
        if (pending && !out.empty()) out.push_back(pending);
        pending = 0;
        out.append(s);
    };
    auto separator = [&](char c) {
        if (pending != '-') pending = c;  // a hyphen wins over spaces
    };

    std::size_t i = 0;
    while (i < raw.size()) {
        auto c = static_cast<unsigned char>(raw[i]);
        if (c < 0x80) {
            ++i;
            if (std::isalnum(c)) {
                char lower = static_cast<char>(std::tolower(c));
                emit(std::string_view(&lower, 1));
            } else if (c == '-') {
                separator('-');
            } else if (std::isspace(c) || c == '.' || c == '_') {
                separator(' ');
            }
            continue;
        }
        // Decode one UTF-8 sequence; malformed bytes are dropped.
        int len = (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + len > raw.size()) {
            ++i;
            continue;
        }
        char32_t cp = len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            auto cc = static_cast<unsigned char>(raw[i + k]);
            if ((cc >> 6) != 0x2) ok = false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            ++i;
            continue;
        }
        char one[2];
        auto folded = fold_codepoint(cp, one);
        if (!folded.empty()) {
            emit(folded);
        } else if (cp >= 0x180) {
            emit(raw.substr(i, len));  // other scripts pass through unchanged
        }
        i += len;
    }
    return out;
}

std::vector<std::string> name_parts(std::string_view normalized) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : normalized) {
        if (c == '-' || c == ' ') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

// ---------------------------------------------------------------------------

void NameFrequencyTable::add(std::string_view raw_name, std::uint64_t female, std::uint64_t male) {
    auto key = normalize_name(raw_name);
    if (key.empty()) return;
    auto& c = counts_[key];
    c.female += female;
    c.male += male;
}

std::optional<NameCounts> NameFrequencyTable::lookup(std::string_view normalized) const {
    auto it = counts_.find(std::string(normalized));
    if (it == counts_.end() || it->second.female + it->second.male == 0) return std::nullopt;
    return it->second;
}

NameFrequencyTable NameFrequencyTable::load(std::istream& in, std::string name, int priority) {
    NameFrequencyTable table(name, priority);
    detail::TsvReader reader(in, name, "name");
    std::vector<std::string_view> cells;
    while (reader.next(cells)) {
        if (cells.size() != 3) reader.fail("corpus", "expected 3 columns, found " + std::to_string(cells.size()));
        std::int64_t f = 0, m = 0;
        if (!detail::parse_number(cells[1], f) || !detail::parse_number(cells[2], m) || f < 0 || m < 0)
            reader.fail("corpus", "counts must be non-negative integers");
        table.add(cells[0], static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(m));
    }
    return table;
}

NameFrequencyTable NameFrequencyTable::load(const std::filesystem::path& path, int priority) {
    std::ifstream in(path);
    if (!in) throw Error("corpus", "cannot open name table " + path.string());
    return load(in, path.filename().string(), priority);
}

nlohmann::json ImputationReport::to_json() const {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : per_source)
        sources.push_back({{"name", s.name}, {"imputed", s.imputed}, {"rate", rate(s.imputed)}});
    return {{"total", total},
            {"preassigned", preassigned},
            {"sources", sources},
            {"not_found", not_found},
            {"not_found_rate", rate(not_found)},
            {"ambiguous", ambiguous},
            {"ambiguous_rate", rate(ambiguous)},
            {"conflicting_parts", conflicting_parts}};
}

NameResolution resolve_name(std::string_view raw_name, std::span<const GenderProvider* const> ordered,
                            double threshold) {
    NameResolution res;
    const auto full = normalize_name(raw_name);
    if (full.empty()) return res;
    const auto parts = name_parts(full);

    auto decide = [&](const NameCounts& c) -> std::optional<Gender> {
        const double total = static_cast<double>(c.female + c.male);
        if (static_cast<double>(c.female) / total >= threshold) return Gender::Female;
        if (static_cast<double>(c.male) / total >= threshold) return Gender::Male;
        return std::nullopt;
    };

    for (std::size_t s = 0; s < ordered.size(); ++s) {
        const auto* provider = ordered[s];
        if (auto c = provider->lookup(full)) {
            res.found = true;
            if (auto g = decide(*c)) {
                res.gender = *g;
                res.source = s;
                return res;
            }
        }
        if (parts.size() < 2) continue;
        bool female = false, male = false;
        for (const auto& part : parts) {
            auto c = provider->lookup(part);
            if (!c) continue;
            res.found = true;
            if (auto g = decide(*c)) (*g == Gender::Female ? female : male) = true;
        }
        if (female && male) {
            res.conflict = true;
            return res;
        }
        if (female || male) {
            res.gender = female ? Gender::Female : Gender::Male;
            res.source = s;
            return res;
        }
    }
    return res;
}

ImputationResult impute_gender(const Corpus& corpus, std::span<const GenderProvider* const> providers,
                               double threshold) {
    if (providers.empty()) throw Error("corpus", "impute_gender needs at least one name table");
    if (!(threshold > 0.5 && threshold <= 1.0)) throw Error("corpus", "threshold must lie in (0.5, 1]");

    std::vector<const GenderProvider*> ordered(providers.begin(), providers.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const GenderProvider* a, const GenderProvider* b) { return a->priority() < b->priority(); });

    ImputationReport report;
    for (const auto* p : ordered) report.per_source.push_back({p->name(), 0});

    const auto& auths = corpus.authorships();
    std::vector<Gender> genders(auths.size());
    report.total = auths.size();
    for (std::size_t i = 0; i < auths.size(); ++i) {
        if (auths[i].gender != Gender::Unassigned) {
            genders[i] = auths[i].gender;
            ++report.preassigned;
            continue;
        }
        auto r = resolve_name(auths[i].first_name, ordered, threshold);
        genders[i] = r.gender;
        if (r.source) {
            ++report.per_source[*r.source].imputed;
        } else if (r.conflict) {
            ++report.conflicting_parts;
        } else if (r.found) {
            ++report.ambiguous;
        } else {
            ++report.not_found;
        }
    }
    return {corpus.with_genders(genders), std::move(report)};
}

}  // namespace homophily
