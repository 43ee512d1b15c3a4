#pragma once

// Benchmarks, accuracy metrics, interval coverage and season-sliced reports.

#include "argox/audit.hpp"
#include "argox/csv.hpp"
#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/panel.hpp"
#include "argox/routing.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <tuple>
#include <algorithm>
#include <string>
#include <vector>

namespace argox {

struct EstimateRecord {
    EpiWeek week;
    std::string geo;
    std::string method;
    double point = 0.0;
    std::optional<double> lo;
    std::optional<double> hi;
    double truth = 0.0;
    std::string provenance; ///< "joint", "standalone" or empty for benchmarks

    bool has_interval() const { return lo.has_value() && hi.has_value(); }
};

/// Carry-forward benchmark: last week's reported %ILI.
inline double naive_estimate(const WeeklyPanel& ili, EpiWeek week, const GeoId& geo)
{
    const auto row = ili.row_of(week.prev());
    if (!row) {
        throw DataError("naive estimate at " + week.str() + ": no %ILI for the previous week");
    }
    const double v = ili.values()(*row, ili.require_column(geo.str()));
    if (!std::isfinite(v)) {
        throw DataError("naive estimate at " + week.str() + ": %ILI for " + geo.str() + " missing in the previous week");
    }
    return v;
}

/// Per-equation OLS coefficients of a lag-1 vector autoregression; column k
/// holds (intercept, lag coefficients) for geography k.
struct Var1Fit {
    Eigen::MatrixXd coefficients; ///< (G + 1) x G
    Eigen::RowVectorXd latest;    ///< (1, p_{T-1}) for the one-step prediction
    bool rank_deficient = false;
};

/// Fits each geography's %ILI on an intercept and the previous week's %ILI
/// of all `geos`, over the `window` weeks before `week`. Rank-deficient
/// designs use the minimum-norm solution.
inline Var1Fit var1_fit(const WeeklyPanel& ili, EpiWeek week, const std::vector<GeoId>& geos, int window = 104,
                        LookaheadAudit* audit = nullptr)
{
    const auto last = ili.row_of(week.prev());
    const auto first = ili.row_of(week - (window + 1));
    if (!last || !first || *last - *first != window) {
        throw DataError("VAR(1) at " + week.str() + " needs " + std::to_string(window + 1) + " prior weeks of %ILI");
    }
    const auto g = static_cast<Eigen::Index>(geos.size());
    Eigen::MatrixXd levels(window + 1, g);
    for (Eigen::Index k = 0; k < g; ++k) {
        levels.col(k) = ili.column(geos[static_cast<std::size_t>(k)].str()).segment(*first, window + 1);
    }
    if (!levels.allFinite()) {
        throw DataError("VAR(1) at " + week.str() + ": missing %ILI in the training window");
    }
    Eigen::MatrixXd x(window, g + 1);
    x.col(0).setOnes();
    x.rightCols(g) = levels.topRows(window);
    const Eigen::MatrixXd y = levels.bottomRows(window);

    Var1Fit fit;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == x.cols()) {
        fit.coefficients = qr.solve(y);
    } else {
        fit.rank_deficient = true;
        fit.coefficients = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(x).solve(y);
    }
    fit.latest.resize(g + 1);
    fit.latest << 1.0, levels.row(window);
    if (audit) {
        audit->record("var1", week, ili.index()[static_cast<std::size_t>(*last)]);
    }
    return fit;
}

/// One-step VAR(1) prediction for `week`, clamped to the %ILI range.
inline Eigen::VectorXd var1_estimate(const WeeklyPanel& ili, EpiWeek week, const std::vector<GeoId>& geos,
                                     int window = 104, LookaheadAudit* audit = nullptr)
{
    const auto fit = var1_fit(ili, week, geos, window, audit);
    Eigen::VectorXd out = (fit.latest * fit.coefficients).transpose();
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        out(k) = clamp_percent(out(k));
    }
    return out;
}

namespace detail {

inline void check_aligned(std::span<const double> est, std::span<const double> truth)
{
    if (est.size() != truth.size()) {
        throw DataError("metric inputs have different lengths");
    }
    if (est.empty()) {
        throw DataError("metric inputs are empty");
    }
}

} // namespace detail

inline double mse(std::span<const double> est, std::span<const double> truth)
{
    detail::check_aligned(est, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        s += (est[i] - truth[i]) * (est[i] - truth[i]);
    }
    return s / static_cast<double>(est.size());
}

inline double mae(std::span<const double> est, std::span<const double> truth)
{
    detail::check_aligned(est, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        s += std::abs(est[i] - truth[i]);
    }
    return s / static_cast<double>(est.size());
}

/// Pearson correlation; nullopt when either series has zero variance or
/// fewer than two points.
inline std::optional<double> correlation(std::span<const double> est, std::span<const double> truth)
{
    detail::check_aligned(est, truth);
    if (est.size() < 2) {
        return std::nullopt;
    }
    const auto n = static_cast<double>(est.size());
    double me = 0.0;
    double mt = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        me += est[i];
        mt += truth[i];
    }
    me /= n;
    mt /= n;
    double see = 0.0;
    double stt = 0.0;
    double set = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        see += (est[i] - me) * (est[i] - me);
        stt += (truth[i] - mt) * (truth[i] - mt);
        set += (est[i] - me) * (truth[i] - mt);
    }
    if (see <= 0.0 || stt <= 0.0) {
        return std::nullopt;
    }
    return set / std::sqrt(see * stt);
}

/// Share of records with lo <= truth <= hi, among records carrying intervals.
inline std::optional<double> coverage_rate(std::span<const EstimateRecord> records)
{
    std::size_t n = 0;
    std::size_t hit = 0;
    for (const auto& r : records) {
        if (!r.has_interval()) {
            continue;
        }
        ++n;
        hit += (*r.lo <= r.truth && r.truth <= *r.hi) ? 1 : 0;
    }
    if (n == 0) {
        return std::nullopt;
    }
    return static_cast<double>(hit) / static_cast<double>(n);
}

struct MetricRow {
    std::string method;
    std::string period;
    std::string geo; ///< empty for geography averages
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> correlation;
    std::size_t weeks = 0;
};

struct RelativeMseRow {
    std::string method;
    std::string period;
    std::string geo;
    double relative_mse = 0.0;
};

struct CoverageRow {
    std::string method;
    std::string geo; ///< "ALL" for the geography average
    double coverage = 0.0;
    std::size_t weeks = 0;
};

struct SeasonReport {
    std::vector<std::string> periods; ///< "whole" followed by season labels
    std::vector<MetricRow> summary;   ///< per method x period, averaged over geographies
    std::vector<MetricRow> per_geo;
    std::vector<RelativeMseRow> relative_mse;
    std::vector<CoverageRow> coverage;

    /// Mean over geographies of MSE(method) / MSE(naive) for `period`.
    std::optional<double> mean_relative_mse(const std::string& method, const std::string& period = "whole") const
    {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& r : relative_mse) {
            if (r.method == method && r.period == period) {
                s += r.relative_mse;
                ++n;
            }
        }
        return n ? std::optional<double>(s / static_cast<double>(n)) : std::nullopt;
    }

    const MetricRow* find_summary(const std::string& method, const std::string& period = "whole") const
    {
        for (const auto& r : summary) {
            if (r.method == method && r.period == period) {
                return &r;
            }
        }
        return nullptr;
    }
};

/// Per-geography metrics for the whole period and each flu season, their
/// averages over geographies, MSE relative to `baseline`, and per-geography
/// interval coverage over the whole period.
inline SeasonReport season_report(const std::vector<EstimateRecord>& records, const std::string& baseline = "naive")
{
    SeasonReport report;
    std::set<EpiWeek> weeks;
    std::set<std::string> methods;
    for (const auto& r : records) {
        weeks.insert(r.week);
        methods.insert(r.method);
    }
    const auto seasons = season_slices(std::vector<EpiWeek>(weeks.begin(), weeks.end()));
    report.periods.push_back("whole");
    for (const auto& s : seasons) {
        report.periods.push_back(s.label);
    }
    auto in_period = [&](std::size_t p, EpiWeek w) { return p == 0 || seasons[p - 1].contains(w); };

    // (method, geo) -> records in week order
    std::map<std::pair<std::string, std::string>, std::vector<const EstimateRecord*>> groups;
    for (const auto& r : records) {
        groups[{r.method, r.geo}].push_back(&r);
    }
    std::map<std::tuple<std::string, std::string, std::string>, double> mse_by; // (method, period, geo)

    for (const auto& method : methods) {
        for (std::size_t p = 0; p < report.periods.size(); ++p) {
            MetricRow avg{method, report.periods[p], "", 0.0, 0.0, std::nullopt, 0};
            std::size_t geos = 0;
            double corr_sum = 0.0;
            std::size_t corr_n = 0;
            for (const auto& [key, rows] : groups) {
                if (key.first != method) {
                    continue;
                }
                std::vector<double> est;
                std::vector<double> truth;
                for (const auto* r : rows) {
                    if (in_period(p, r->week)) {
                        est.push_back(r->point);
                        truth.push_back(r->truth);
                    }
                }
                if (est.empty()) {
                    continue;
                }
                MetricRow row{method, report.periods[p], key.second, mse(est, truth), mae(est, truth),
                              correlation(est, truth), est.size()};
                mse_by[{method, report.periods[p], key.second}] = row.mse;
                avg.mse += row.mse;
                avg.mae += row.mae;
                avg.weeks = std::max(avg.weeks, row.weeks);
                if (row.correlation) {
                    corr_sum += *row.correlation;
                    ++corr_n;
                }
                ++geos;
                report.per_geo.push_back(std::move(row));
            }
            if (geos == 0) {
                continue;
            }
            avg.mse /= static_cast<double>(geos);
            avg.mae /= static_cast<double>(geos);
            if (corr_n) {
                avg.correlation = corr_sum / static_cast<double>(corr_n);
            }
            report.summary.push_back(std::move(avg));
        }
    }

    for (const auto& [key, value] : mse_by) {
        const auto& [method, period, geo] = key;
        const auto base = mse_by.find({baseline, period, geo});
        if (base != mse_by.end() && base->second > 0.0) {
            report.relative_mse.push_back({method, period, geo, value / base->second});
        }
    }

    for (const auto& method : methods) {
        double sum = 0.0;
        std::size_t geos = 0;
        std::size_t total = 0;
        for (const auto& [key, rows] : groups) {
            if (key.first != method) {
                continue;
            }
            std::vector<EstimateRecord> copy;
            for (const auto* r : rows) {
                copy.push_back(*r);
            }
            if (const auto c = coverage_rate(copy)) {
                const auto n = static_cast<std::size_t>(
                    std::count_if(copy.begin(), copy.end(), [](const auto& r) { return r.has_interval(); }));
                report.coverage.push_back({method, key.second, *c, n});
                sum += *c;
                total += n;
                ++geos;
            }
        }
        if (geos) {
            report.coverage.push_back({method, "ALL", sum / static_cast<double>(geos), total});
        }
    }
    return report;
}

namespace detail {

inline std::string opt(const std::optional<double>& v)
{
    return v ? csv::format(*v) : std::string();
}

} // namespace detail

inline void write_summary_csv(std::ostream& out, const SeasonReport& report)
{
    out << "method,period,mse,mae,correlation\n";
    for (const auto& r : report.summary) {
        out << r.method << ',' << r.period << ',' << csv::format(r.mse) << ',' << csv::format(r.mae) << ','
            << detail::opt(r.correlation) << '\n';
    }
}

inline void write_per_state_csv(std::ostream& out, const SeasonReport& report)
{
    out << "method,period,geo,mse,mae,correlation,weeks\n";
    for (const auto& r : report.per_geo) {
        out << r.method << ',' << r.period << ',' << r.geo << ',' << csv::format(r.mse) << ','
            << csv::format(r.mae) << ',' << detail::opt(r.correlation) << ',' << r.weeks << '\n';
    }
}

inline void write_relative_mse_csv(std::ostream& out, const SeasonReport& report)
{
    out << "method,period,geo,relative_mse\n";
    for (const auto& r : report.relative_mse) {
        out << r.method << ',' << r.period << ',' << r.geo << ',' << csv::format(r.relative_mse) << '\n';
    }
}

inline void write_coverage_csv(std::ostream& out, const SeasonReport& report)
{
    out << "method,geo,coverage,weeks\n";
    for (const auto& r : report.coverage) {
        out << r.method << ',' << r.geo << ',' << csv::format(r.coverage) << ',' << r.weeks << '\n';
    }
}

inline nlohmann::json summary_json(const SeasonReport& report)
{
    nlohmann::json j;
    j["periods"] = report.periods;
    for (const auto& r : report.summary) {
        auto& cell = j["metrics"][r.method][r.period];
        cell["mse"] = r.mse;
        cell["mae"] = r.mae;
        cell["correlation"] = r.correlation ? nlohmann::json(*r.correlation) : nlohmann::json(nullptr);
    }
    for (const auto& period : report.periods) {
        for (const auto& r : report.summary) {
            if (r.period == period) {
                if (const auto v = report.mean_relative_mse(r.method, period)) {
                    j["mean_relative_mse"][r.method][period] = *v;
                }
            }
        }
    }
    for (const auto& c : report.coverage) {
        if (c.geo == "ALL") {
            j["coverage"][c.method] = c.coverage;
        }
    }
    return j;
}

/// `year,week,geo,method,point,lo,hi,truth,provenance`; absent bounds are empty.
inline void write_estimates_csv(std::ostream& out, const std::vector<EstimateRecord>& records)
{
    out << "year,week,geo,method,point,lo,hi,truth,provenance\n";
    for (const auto& r : records) {
        out << r.week.year << ',' << r.week.week << ',' << r.geo << ',' << r.method << ',' << csv::format(r.point)
            << ',' << detail::opt(r.lo) << ',' << detail::opt(r.hi) << ',' << csv::format(r.truth) << ','
            << r.provenance << '\n';
    }
}

inline std::vector<EstimateRecord> read_estimates_csv(std::istream& in, std::string_view source = "<estimates>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"year", "week", "geo", "method", "point", "lo", "hi", "truth", "provenance"});
    const auto idx = [&](std::string_view c) { return table.index(c); };
    std::vector<EstimateRecord> out;
    for (const auto& row : table.rows()) {
        EstimateRecord r;
        r.week = EpiWeek::checked(csv::parse_int(row[idx("year")], "year"), csv::parse_int(row[idx("week")], "week"));
        r.geo = row[idx("geo")];
        r.method = row[idx("method")];
        r.point = csv::parse_double(row[idx("point")], "point");
        if (!row[idx("lo")].empty()) {
            r.lo = csv::parse_double(row[idx("lo")], "lo");
        }
        if (!row[idx("hi")].empty()) {
            r.hi = csv::parse_double(row[idx("hi")], "hi");
        }
        r.truth = csv::parse_double(row[idx("truth")], "truth");
        r.provenance = row[idx("provenance")];
        out.push_back(std::move(r));
    }
    return out;
}

/// Pre-computed estimates supplied by the user (`year,week,geo,estimate`),
/// joined with the %ILI truth. Rows outside [first, last] or for geographies
/// not in `geos` are ignored.
inline std::vector<EstimateRecord> read_external_estimates(std::istream& in, const std::string& method,
                                                           const WeeklyPanel& ili, const std::vector<GeoId>& geos,
                                                           EpiWeek first, EpiWeek last,
                                                           std::string_view source = "<external>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"year", "week", "geo", "estimate"});
    std::set<std::string> wanted;
    for (const auto& g : geos) {
        wanted.insert(g.str());
    }
    std::vector<EstimateRecord> out;
    for (const auto& row : table.rows()) {
        const auto week = EpiWeek::checked(csv::parse_int(row[table.index("year")], "year"),
                                           csv::parse_int(row[table.index("week")], "week"));
        const auto& geo = row[table.index("geo")];
        if (week < first || last < week || !wanted.contains(geo)) {
            continue;
        }
        EstimateRecord r;
        r.week = week;
        r.geo = geo;
        r.method = method;
        r.point = csv::parse_double(row[table.index("estimate")], "estimate");
        r.truth = ili.at(week, geo);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace argox
