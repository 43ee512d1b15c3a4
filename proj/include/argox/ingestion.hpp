#pragma once

#include "argox/csv.hpp"
#include "argox/epiweek.hpp"
#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/panel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace argox {

/// Lower clamp (in percent) applied before the logit so zero %ILI weeks stay
/// finite on the model scale.
inline constexpr double kIliFloor = 0.01;

/// ln(q / (1 - q)) with q = percent / 100. Values in [0, floor) and
/// (100 - floor, 100) are clamped into [floor, 100 - floor].
inline double logit(double percent)
{
    if (!std::isfinite(percent) || percent < 0.0 || percent >= 100.0) {
        throw DataError("logit argument outside [0, 100): " + csv::format(percent));
    }
    const double q = std::clamp(percent, kIliFloor, 100.0 - kIliFloor) / 100.0;
    return std::log(q) - std::log1p(-q);
}

/// Inverse of logit, returned in percent.
inline double inv_logit(double y)
{
    if (y >= 0.0) {
        return 100.0 / (1.0 + std::exp(-y));
    }
    const double e = std::exp(y);
    return 100.0 * e / (1.0 + e);
}

/// Clamps a percent estimate into the open unit interval used by the logit.
inline double clamp_percent(double percent)
{
    return std::clamp(percent, kIliFloor, 100.0 - kIliFloor);
}

namespace detail {

struct LongRow {
    EpiWeek week;
    std::string geo;
    std::string series;
    double value;
};

/// Pivot long rows into a contiguous weekly panel, filling gaps with `fill`.
inline WeeklyPanel pivot(const std::vector<LongRow>& rows, const std::vector<std::string>& columns,
                         double fill, const std::vector<EpiWeek>& index)
{
    std::map<std::string, Eigen::Index> col;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        col.emplace(columns[i], static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(index.size()),
                                                       static_cast<Eigen::Index>(columns.size()), fill);
    const EpiWeek first = index.front();
    for (const auto& r : rows) {
        values(r.week - first, col.at(r.series)) = r.value;
    }
    return WeeklyPanel(index, columns, std::move(values));
}

} // namespace detail

/// Reads `year,week,geo,ili_percent`. Accepted geographies are the registry's
/// state-level units, its regions, and "US". The result has one column per
/// geography over the contiguous week range covered by the file. Between the
/// first and last state-level week every state cell must be present; other
/// missing cells are NaN.
inline WeeklyPanel parse_ili_csv(std::istream& in, const GeoRegistry& registry,
                                 std::string_view source = "<ili>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"year", "week", "geo", "ili_percent"});
    const auto iy = table.index("year");
    const auto iw = table.index("week");
    const auto ig = table.index("geo");
    const auto iv = table.index("ili_percent");

    std::vector<detail::LongRow> rows;
    std::set<std::pair<EpiWeek, std::string>> seen;
    std::set<std::string> geos;
    for (const auto& row : table.rows()) {
        const auto week = EpiWeek::checked(csv::parse_int(row[iy], "year"), csv::parse_int(row[iw], "week"));
        const GeoId geo{row[ig]};
        if (geo.str() == "FL") {
            throw DataError(std::string(source) + ": excluded geography FL");
        }
        if (!registry.contains(geo) && !registry.is_region(geo) && !geo.is_national()) {
            throw DataError(std::string(source) + ": unknown geo '" + geo.str() + "'");
        }
        const double v = csv::parse_double(row[iv], "ili_percent");
        if (!(v >= 0.0 && v < 100.0)) {
            throw DataError(std::string(source) + ": %ILI outside [0,100) for " + geo.str() + " at " +
                            week.str() + ": " + row[iv]);
        }
        if (!seen.emplace(week, geo.str()).second) {
            throw DataError(std::string(source) + ": duplicate row for " + geo.str() + " at " + week.str());
        }
        geos.insert(geo.str());
        rows.push_back({week, geo.str(), geo.str(), v});
    }
    if (rows.empty()) {
        throw DataError(std::string(source) + ": no %ILI rows");
    }

    // Column order: registry states, then regions, then national.
    std::vector<std::string> columns;
    for (const auto& s : registry.states()) {
        if (!geos.contains(s.str())) {
            throw DataError(std::string(source) + ": no %ILI rows for state-level geography " + s.str());
        }
        columns.push_back(s.str());
    }
    for (const auto& r : registry.regions()) {
        if (geos.contains(r.str())) {
            columns.push_back(r.str());
        }
    }
    if (geos.contains(kNational.str())) {
        columns.push_back(kNational.str());
    }

    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                              [](const auto& a, const auto& b) { return a.week < b.week; });
    auto panel = detail::pivot(rows, columns, std::numeric_limits<double>::quiet_NaN(),
                               week_range(lo->week, hi->week));
    // State-level reporting may start later than regional/national series;
    // inside the state-level range every cell is required.
    std::optional<EpiWeek> state_first;
    std::optional<EpiWeek> state_last;
    for (const auto& r : rows) {
        if (registry.contains(GeoId{r.geo})) {
            state_first = state_first ? std::min(*state_first, r.week) : r.week;
            state_last = state_last ? std::max(*state_last, r.week) : r.week;
        }
    }
    const auto r0 = panel.require_row(*state_first);
    const auto r1 = panel.require_row(*state_last);
    for (const auto& s : registry.states()) {
        const auto c = panel.require_column(s.str());
        for (Eigen::Index r = r0; r <= r1; ++r) {
            if (std::isnan(panel.values()(r, c))) {
                throw DataError(std::string(source) + ": missing %ILI for " + s.str() + " at " +
                                panel.index()[static_cast<std::size_t>(r)].str());
            }
        }
    }
    return panel;
}

inline WeeklyPanel parse_ili_csv(const std::string& path, const GeoRegistry& registry)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return parse_ili_csv(in, registry, path);
}

/// Writes every non-missing cell as a `year,week,geo,ili_percent` row.
inline void write_ili_csv(std::ostream& out, const WeeklyPanel& panel)
{
    out << "year,week,geo,ili_percent\n";
    for (Eigen::Index r = 0; r < panel.rows(); ++r) {
        const auto& w = panel.index()[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < panel.cols(); ++c) {
            const double v = panel.values()(r, c);
            if (!std::isnan(v)) {
                out << w.year << ',' << w.week << ',' << panel.columns()[static_cast<std::size_t>(c)] << ','
                    << csv::format(v) << '\n';
            }
        }
    }
}

/// Raw search volumes, one panel per geography (columns are query terms).
/// All panels share the same week index and term list.
using TrendsPanels = std::map<std::string, WeeklyPanel>;

namespace detail {

inline void read_trends_rows(const csv::Table& table, std::vector<LongRow>& rows)
{
    table.require({"year", "week", "geo", "term", "volume"});
    const auto iy = table.index("year");
    const auto iw = table.index("week");
    const auto ig = table.index("geo");
    const auto it = table.index("term");
    const auto iv = table.index("volume");
    for (const auto& row : table.rows()) {
        const auto week = EpiWeek::checked(csv::parse_int(row[iy], "year"), csv::parse_int(row[iw], "week"));
        const double v = csv::parse_double(row[iv], "volume");
        if (!(v >= 0.0 && v <= 100.0)) {
            throw DataError(table.source() + ": search volume outside [0,100] for " + row[ig] + "/" + row[it] +
                            " at " + week.str() + ": " + row[iv]);
        }
        rows.push_back({week, row[ig], row[it], v});
    }
}

inline TrendsPanels build_trends(const std::vector<LongRow>& rows)
{
    if (rows.empty()) {
        throw DataError("no search-volume rows");
    }
    std::set<std::string> terms;
    std::set<std::tuple<EpiWeek, std::string, std::string>> seen;
    std::map<std::string, std::vector<LongRow>> by_geo;
    EpiWeek lo = rows.front().week;
    EpiWeek hi = rows.front().week;
    for (const auto& r : rows) {
        if (!seen.emplace(r.week, r.geo, r.series).second) {
            throw DataError("duplicate search row for " + r.geo + "/" + r.series + " at " + r.week.str());
        }
        terms.insert(r.series);
        by_geo[r.geo].push_back(r);
        lo = std::min(lo, r.week);
        hi = std::max(hi, r.week);
    }
    const std::vector<std::string> columns(terms.begin(), terms.end());
    const auto index = week_range(lo, hi);
    TrendsPanels out;
    for (const auto& [geo, geo_rows] : by_geo) {
        out.emplace(geo, pivot(geo_rows, columns, 0.0, index));
    }
    return out;
}

} // namespace detail

/// Reads `year,week,geo,term,volume`. Weeks or terms missing for a geography
/// are filled with 0, the same encoding Google Trends uses for low volume.
inline TrendsPanels parse_trends_csv(std::istream& in, std::string_view source = "<trends>")
{
    std::vector<detail::LongRow> rows;
    detail::read_trends_rows(csv::Table::read(in, source), rows);
    return detail::build_trends(rows);
}

inline TrendsPanels parse_trends_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return parse_trends_csv(in, path);
}

/// Reads and merges every *.csv file in `dir` (sorted by file name).
inline TrendsPanels load_trends_dir(const std::string& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw DataError("trends directory not found: " + dir);
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<detail::LongRow> rows;
    for (const auto& f : files) {
        detail::read_trends_rows(csv::Table::read_file(f.string()), rows);
    }
    return detail::build_trends(rows);
}

inline void write_trends_csv(std::ostream& out, const TrendsPanels& panels)
{
    out << "year,week,geo,term,volume\n";
    for (const auto& [geo, panel] : panels) {
        for (Eigen::Index r = 0; r < panel.rows(); ++r) {
            const auto& w = panel.index()[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < panel.cols(); ++c) {
                out << w.year << ',' << w.week << ',' << geo << ','
                    << panel.columns()[static_cast<std::size_t>(c)] << ','
                    << csv::format(panel.values()(r, c)) << '\n';
            }
        }
    }
}

/// Elementwise ln(1 + x).
inline FeaturePanel log1p_features(const WeeklyPanel& panel)
{
    if ((panel.values().array() < 0.0).any()) {
        throw DataError("log1p_features: negative search volume");
    }
    if (!panel.values().allFinite()) {
        throw DataError("log1p_features: non-finite search volume");
    }
    return FeaturePanel(panel.index(), panel.columns(), panel.values().array().log1p().matrix());
}

/// Share of zero cells per geography, computed on raw volumes.
inline std::map<std::string, double> zero_fraction_report(const TrendsPanels& panels)
{
    std::map<std::string, double> out;
    for (const auto& [geo, panel] : panels) {
        if (panel.empty()) {
            throw DataError("zero_fraction_report: empty panel for " + geo);
        }
        const auto zeros = (panel.values().array() == 0.0).count();
        out.emplace(geo, static_cast<double>(zeros) / static_cast<double>(panel.values().size()));
    }
    return out;
}

/// One flu season: week 40 of `start_year` through week 20 of the next year,
/// clipped to the available index.
struct SeasonSlice {
    std::string label; ///< e.g. "14-15"
    EpiWeek first;
    EpiWeek last;

    bool contains(EpiWeek w) const { return first <= w && w <= last; }
};

inline std::vector<SeasonSlice> season_slices(const std::vector<EpiWeek>& index)
{
    std::vector<SeasonSlice> out;
    if (index.empty()) {
        return out;
    }
    const int y0 = index.front().year - 1;
    const int y1 = index.back().year;
    for (int y = y0; y <= y1; ++y) {
        const EpiWeek start{y, 40};
        const EpiWeek stop{y + 1, 20};
        const auto lo = std::lower_bound(index.begin(), index.end(), start);
        const auto hi = std::upper_bound(index.begin(), index.end(), stop);
        if (lo >= hi) {
            continue;
        }
        char label[16];
        std::snprintf(label, sizeof label, "%02d-%02d", y % 100, (y + 1) % 100);
        out.push_back({label, *lo, *(hi - 1)});
    }
    return out;
}

} // namespace argox
