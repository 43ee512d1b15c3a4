#pragma once

#include "argox/csv.hpp"
#include "argox/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace argox {

/// Geography code: two-letter state code, "DC", "NYC", "R1".."R10" or "US".
class GeoId {
public:
    GeoId() = default;
    explicit GeoId(std::string code) : code_(std::move(code)) {}

    const std::string& str() const { return code_; }
    auto operator<=>(const GeoId&) const = default;

    bool is_national() const { return code_ == "US"; }

    /// Region number for "R<k>" codes, nullopt otherwise.
    std::optional<int> region_number() const
    {
        if (code_.size() < 2 || code_[0] != 'R') {
            return std::nullopt;
        }
        int k = 0;
        for (std::size_t i = 1; i < code_.size(); ++i) {
            if (code_[i] < '0' || code_[i] > '9') {
                return std::nullopt;
            }
            k = 10 * k + (code_[i] - '0');
        }
        return k;
    }

private:
    std::string code_;
};

inline const GeoId kNational{"US"};

namespace detail {

struct HhsAssignment {
    std::string_view geo;
    int region;
};

// HHS region membership of the 51 state-level CDC reporting units
// (50 states without Florida, plus DC and New York City).
inline constexpr std::array<HhsAssignment, 51> kHhsRegions{{
    {"CT", 1}, {"ME", 1}, {"MA", 1}, {"NH", 1}, {"RI", 1}, {"VT", 1},
    {"NJ", 2}, {"NY", 2}, {"NYC", 2},
    {"DE", 3}, {"DC", 3}, {"MD", 3}, {"PA", 3}, {"VA", 3}, {"WV", 3},
    {"AL", 4}, {"GA", 4}, {"KY", 4}, {"MS", 4}, {"NC", 4}, {"SC", 4}, {"TN", 4},
    {"IL", 5}, {"IN", 5}, {"MI", 5}, {"MN", 5}, {"OH", 5}, {"WI", 5},
    {"AR", 6}, {"LA", 6}, {"NM", 6}, {"OK", 6}, {"TX", 6},
    {"IA", 7}, {"KS", 7}, {"MO", 7}, {"NE", 7},
    {"CO", 8}, {"MT", 8}, {"ND", 8}, {"SD", 8}, {"UT", 8}, {"WY", 8},
    {"AZ", 9}, {"CA", 9}, {"HI", 9}, {"NV", 9},
    {"AK", 10}, {"ID", 10}, {"OR", 10}, {"WA", 10},
}};

inline std::optional<int> hhs_region(std::string_view geo)
{
    for (const auto& a : kHhsRegions) {
        if (a.geo == geo) {
            return a.region;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// States modelled without cross-state pooling in the published configuration.
inline const std::set<GeoId> kPaperStandalone{GeoId{"HI"}, GeoId{"AK"}, GeoId{"VT"}, GeoId{"MT"},
                                              GeoId{"ND"}, GeoId{"ME"}, GeoId{"SD"}};

/// Non-contiguous states; always routed to the stand-alone model.
inline const std::set<GeoId> kNoncontiguous{GeoId{"HI"}, GeoId{"AK"}};

/// Immutable geography reference data: state-level units, their region,
/// population weight, and the stand-alone flag.
class GeoRegistry {
public:
    struct Entry {
        GeoId geo;
        GeoId region;
        double population = 0.0;
        bool standalone = false;
    };

    GeoRegistry() = default;

    /// Validates and takes ownership of `entries`. Registries that use US
    /// state codes must describe exactly the 51 CDC state-level units with
    /// their HHS regions; other registries (synthetic panels) only need a
    /// consistent partition into R<k> regions.
    explicit GeoRegistry(std::vector<Entry> entries) : entries_(std::move(entries))
    {
        std::set<GeoId> seen;
        bool us_codes = false;
        for (const auto& e : entries_) {
            const auto& code = e.geo.str();
            if (code == "FL") {
                throw DataError("excluded geography FL (no state-level %ILI reported)");
            }
            if (code.empty() || e.geo.is_national() || e.geo.region_number()) {
                throw DataError("invalid state-level geography '" + code + "'");
            }
            if (!seen.insert(e.geo).second) {
                throw DataError("duplicate geography " + code);
            }
            const auto k = e.region.region_number();
            if (!k || *k < 1 || *k > 10) {
                throw DataError("unknown region '" + e.region.str() + "' for " + code);
            }
            if (!(e.population > 0.0) || !std::isfinite(e.population)) {
                throw DataError("non-positive population for " + code);
            }
            us_codes = us_codes || detail::hhs_region(code).has_value();
        }
        if (entries_.empty()) {
            throw DataError("registry has no geographies");
        }
        if (us_codes) {
            validate_us_layout();
        }
        for (const auto& e : entries_) {
            by_geo_.emplace(e.geo, &e - entries_.data());
            if (e.standalone) {
                standalone_.insert(e.geo);
            }
        }
        std::set<GeoId> regions;
        for (const auto& e : entries_) {
            regions.insert(e.region);
        }
        regions_.assign(regions.begin(), regions.end());
        std::sort(regions_.begin(), regions_.end(), [](const GeoId& a, const GeoId& b) {
            return *a.region_number() < *b.region_number();
        });
        us_layout_ = us_codes;
    }

    std::vector<GeoId> states() const
    {
        std::vector<GeoId> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) {
            out.push_back(e.geo);
        }
        return out;
    }

    const std::vector<GeoId>& regions() const { return regions_; }
    const std::vector<Entry>& entries() const { return entries_; }
    const std::set<GeoId>& standalone_set() const { return standalone_; }
    std::size_t size() const { return entries_.size(); }
    bool us_layout() const { return us_layout_; }

    bool contains(const GeoId& g) const { return by_geo_.contains(g); }
    bool is_standalone(const GeoId& g) const { return standalone_.contains(g); }

    const Entry& entry(const GeoId& g) const
    {
        const auto it = by_geo_.find(g);
        if (it == by_geo_.end()) {
            throw DataError("unknown geography " + g.str());
        }
        return entries_[it->second];
    }

    const GeoId& region_of(const GeoId& g) const { return entry(g).region; }
    double population(const GeoId& g) const { return entry(g).population; }

    bool is_region(const GeoId& r) const
    {
        return std::find(regions_.begin(), regions_.end(), r) != regions_.end();
    }

    /// State-level members of `region`, in registry order.
    std::vector<GeoId> region_members(const GeoId& region) const
    {
        if (!is_region(region)) {
            throw DataError("unknown region id " + region.str());
        }
        std::vector<GeoId> out;
        for (const auto& e : entries_) {
            if (e.region == region) {
                out.push_back(e.geo);
            }
        }
        return out;
    }

    /// States that are part of the contiguous US (everything but HI, AK).
    std::vector<GeoId> contiguous_states() const
    {
        std::vector<GeoId> out;
        for (const auto& e : entries_) {
            if (!kNoncontiguous.contains(e.geo)) {
                out.push_back(e.geo);
            }
        }
        return out;
    }

    /// Copy with a different stand-alone set (e.g. from a routing file).
    GeoRegistry with_standalone(const std::set<GeoId>& set) const
    {
        auto copy = entries_;
        for (auto& e : copy) {
            e.standalone = set.contains(e.geo);
        }
        for (const auto& g : set) {
            if (!contains(g)) {
                throw DataError("stand-alone geography " + g.str() + " not in registry");
            }
        }
        return GeoRegistry(std::move(copy));
    }

private:
    void validate_us_layout() const
    {
        std::set<std::string> present;
        for (const auto& e : entries_) {
            const auto expected = detail::hhs_region(e.geo.str());
            if (!expected) {
                throw DataError("unknown geography " + e.geo.str() + " in a US registry");
            }
            if (*e.region.region_number() != *expected) {
                throw DataError("wrong region for " + e.geo.str() + ": expected R" +
                                std::to_string(*expected) + ", got " + e.region.str());
            }
            present.insert(e.geo.str());
        }
        for (const auto& a : detail::kHhsRegions) {
            if (!present.contains(std::string(a.geo))) {
                throw DataError("missing geography " + std::string(a.geo) +
                                " (US registry needs all 51 state-level units)");
            }
        }
    }

    std::vector<Entry> entries_;
    std::map<GeoId, std::size_t> by_geo_;
    std::set<GeoId> standalone_;
    std::vector<GeoId> regions_;
    bool us_layout_ = false;
};

/// Parses the `geo,region,population,standalone` registry format.
inline GeoRegistry parse_registry(std::istream& in, std::string_view source = "<registry>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"geo", "region", "population", "standalone"});
    const auto ig = table.index("geo");
    const auto ir = table.index("region");
    const auto ip = table.index("population");
    const auto is = table.index("standalone");
    std::vector<GeoRegistry::Entry> entries;
    for (const auto& row : table.rows()) {
        GeoRegistry::Entry e;
        e.geo = GeoId{row[ig]};
        e.region = GeoId{row[ir]};
        e.population = csv::parse_double(row[ip], "population");
        const int flag = csv::parse_int(row[is], "standalone");
        if (flag != 0 && flag != 1) {
            throw DataError("standalone flag must be 0 or 1 for " + row[ig]);
        }
        e.standalone = flag == 1;
        entries.push_back(std::move(e));
    }
    return GeoRegistry(std::move(entries));
}

inline GeoRegistry load_registry(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open registry " + path);
    }
    return parse_registry(in, path);
}

inline void write_registry(std::ostream& out, const GeoRegistry& registry)
{
    out << "geo,region,population,standalone\n";
    for (const auto& e : registry.entries()) {
        out << e.geo.str() << ',' << e.region.str() << ',' << csv::format(e.population) << ','
            << (e.standalone ? 1 : 0) << '\n';
    }
}

} // namespace argox

template <>
struct std::hash<argox::GeoId> {
    std::size_t operator()(const argox::GeoId& g) const noexcept
    {
        return std::hash<std::string>{}(g.str());
    }
};
