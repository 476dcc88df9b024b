#pragma once

// Line-oriented reader for the tab-separated input formats.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "homophily/error.hpp"

namespace homophily::detail {

class TsvReader {
public:
    /// `header` is the expected first column name; a first data line whose
    /// first cell equals it is treated as a header row and skipped.
    TsvReader(std::istream& in, std::string label, std::string header)
        : in_(in), label_(std::move(label)), header_(std::move(header)) {}

    /// Fetches the next record; blank lines and '#' comments are skipped.
    bool next(std::vector<std::string_view>& cells) {
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            if (line_.empty() || line_[0] == '#') continue;
            split(line_, cells);
            if (first_ && cells.front() == header_) {
                first_ = false;
                continue;
            }
            first_ = false;
            return true;
        }
        return false;
    }

    std::size_t line() const noexcept { return line_no_; }
    const std::string& label() const noexcept { return label_; }

    [[noreturn]] void fail(const std::string& module, const std::string& what) const {
        throw Error(module, label_ + ":" + std::to_string(line_no_) + ": " + what);
    }

private:
    static void split(std::string_view s, std::vector<std::string_view>& out) {
        out.clear();
        std::size_t start = 0;
        while (true) {
            auto tab = s.find('\t', start);
            if (tab == std::string_view::npos) {
                out.push_back(s.substr(start));
                return;
            }
            out.push_back(s.substr(start, tab - start));
            start = tab + 1;
        }
    }

    std::istream& in_;
    std::string label_;
    std::string header_;
    std::string line_;
    std::size_t line_no_ = 0;
    bool first_ = true;
};

template <class T>
bool parse_number(std::string_view s, T& out) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace homophily::detail
