#pragma once

// Minimal comma-separated reader/writer. The data files used here are plain
// numeric tables without quoting, so no escaping rules are implemented.

#include "argox/error.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace argox::csv {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view line, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view field, std::string_view what)
{
    field = trim(field);
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    if (!field.empty() && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (field.empty() || ec != std::errc{} || ptr != end) {
        throw DataError("non-numeric value '" + std::string(field) + "' in column " + std::string(what));
    }
    return value;
}

inline int parse_int(std::string_view field, std::string_view what)
{
    field = trim(field);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError("non-integer value '" + std::string(field) + "' in column " + std::string(what));
    }
    return value;
}

/// Header-indexed table read fully into memory.
class Table {
public:
    static Table read(std::istream& in, std::string_view source = "<stream>")
    {
        Table t;
        t.source_ = source;
        std::string line;
        bool have_header = false;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) {
                continue;
            }
            auto fields = split(line);
            if (!have_header) {
                for (std::size_t i = 0; i < fields.size(); ++i) {
                    t.columns_.emplace(fields[i], i);
                }
                t.header_ = std::move(fields);
                have_header = true;
                continue;
            }
            if (fields.size() != t.header_.size()) {
                throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(t.header_.size()) + " fields, got " +
                                std::to_string(fields.size()));
            }
            t.rows_.push_back(std::move(fields));
        }
        if (!have_header) {
            throw DataError(std::string(source) + ": missing header row");
        }
        return t;
    }

    static Table read_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) {
            throw DataError("cannot open " + path);
        }
        return read(in, path);
    }

    /// Throws unless every named column is present.
    void require(std::initializer_list<std::string_view> names) const
    {
        for (auto name : names) {
            if (!columns_.contains(std::string(name))) {
                throw DataError(source_ + ": missing column '" + std::string(name) + "'");
            }
        }
    }

    std::size_t index(std::string_view name) const
    {
        const auto it = columns_.find(std::string(name));
        if (it == columns_.end()) {
            throw DataError(source_ + ": missing column '" + std::string(name) + "'");
        }
        return it->second;
    }

    bool has(std::string_view name) const { return columns_.contains(std::string(name)); }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    const std::vector<std::string>& header() const { return header_; }
    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// Shortest representation that round-trips a double exactly.
inline std::string format(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace argox::csv
