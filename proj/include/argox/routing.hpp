#pragma once

// Chooses the stand-alone geographies: HI and AK plus the contiguous states
// whose in-sample %ILI is least explained by everyone else's.

#include "argox/csv.hpp"
#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/panel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace argox {

struct MultipleCorrelation {
    double r2 = 0.0;
    bool rank_deficient = false; ///< solved by minimum-norm least squares
};

/// Least squares with an intercept column already in `x`; falls back to the
/// minimum-norm solution when the design is rank deficient.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool* rank_deficient = nullptr)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == x.cols()) {
        if (rank_deficient) {
            *rank_deficient = false;
        }
        return qr.solve(y);
    }
    if (rank_deficient) {
        *rank_deficient = true;
    }
    return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(x).solve(y);
}

/// R^2 of regressing `geo`'s %ILI over [first, last] on: every other
/// contiguous state, every region other than its own, and the national
/// series, plus an intercept.
inline MultipleCorrelation multiple_correlation_r2(const GeoId& geo, const WeeklyPanel& ili, const GeoRegistry& registry,
                                                   EpiWeek first, EpiWeek last)
{
    const auto r0 = ili.row_of(first);
    const auto r1 = ili.row_of(last);
    if (!r0 || !r1 || *r1 < *r0) {
        throw DataError("in-sample range " + first.str() + ".." + last.str() + " not covered by %ILI data");
    }
    const Eigen::Index n = *r1 - *r0 + 1;

    std::vector<std::string> predictors;
    for (const auto& s : registry.contiguous_states()) {
        if (s != geo) {
            predictors.push_back(s.str());
        }
    }
    const auto& own_region = registry.region_of(geo);
    for (const auto& r : registry.regions()) {
        if (r != own_region) {
            predictors.push_back(r.str());
        }
    }
    predictors.push_back(kNational.str());

    const auto p = static_cast<Eigen::Index>(predictors.size()) + 1;
    if (n <= p) {
        throw DataError("multiple correlation for " + geo.str() + ": " + std::to_string(n) +
                        " in-sample weeks do not exceed " + std::to_string(p) + " regression columns");
    }
    Eigen::MatrixXd x(n, p);
    x.col(0).setOnes();
    for (Eigen::Index j = 1; j < p; ++j) {
        x.col(j) = ili.column(predictors[static_cast<std::size_t>(j - 1)]).segment(*r0, n);
    }
    const Eigen::VectorXd y = ili.column(geo.str()).segment(*r0, n);
    if (!x.allFinite() || !y.allFinite()) {
        throw DataError("multiple correlation for " + geo.str() + ": missing %ILI in the in-sample range");
    }
    MultipleCorrelation out;
    const Eigen::VectorXd beta = least_squares(x, y, &out.rank_deficient);
    const double sst = (y.array() - y.mean()).square().sum();
    const double ssr = (y - x * beta).squaredNorm();
    out.r2 = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 0.0;
    return out;
}

/// Non-contiguous states plus the `lowest` contiguous states with the
/// smallest R^2. R^2 values equal to 1e-10 count as ties, broken by
/// geography code.
inline std::set<GeoId> select_standalone(const std::map<GeoId, double>& r2, const GeoRegistry& registry,
                                         int lowest = 5)
{
    std::vector<std::pair<double, GeoId>> candidates;
    for (const auto& [geo, value] : r2) {
        if (!kNoncontiguous.contains(geo)) {
            candidates.emplace_back(std::round(value * 1e10), geo);
        }
    }
    if (static_cast<int>(candidates.size()) < lowest) {
        throw DataError("select_standalone: only " + std::to_string(candidates.size()) +
                        " contiguous candidates, need " + std::to_string(lowest));
    }
    std::sort(candidates.begin(), candidates.end());
    std::set<GeoId> out;
    for (const auto& g : kNoncontiguous) {
        if (registry.contains(g)) {
            out.insert(g);
        }
    }
    for (int i = 0; i < lowest; ++i) {
        out.insert(candidates[static_cast<std::size_t>(i)].second);
    }
    return out;
}

struct Routing {
    std::map<GeoId, double> r2; ///< contiguous states only
    std::set<GeoId> standalone;
};

inline Routing route(const WeeklyPanel& ili, const GeoRegistry& registry, EpiWeek first, EpiWeek last,
                     int lowest = 5)
{
    Routing out;
    for (const auto& s : registry.contiguous_states()) {
        out.r2.emplace(s, multiple_correlation_r2(s, ili, registry, first, last).r2);
    }
    out.standalone = select_standalone(out.r2, registry, lowest);
    return out;
}

/// `geo,r2,selected`; non-contiguous states are written with an empty r2.
inline void write_standalone_csv(std::ostream& out, const Routing& routing, const GeoRegistry& registry)
{
    out << "geo,r2,selected\n";
    for (const auto& g : registry.states()) {
        const auto it = routing.r2.find(g);
        out << g.str() << ',' << (it != routing.r2.end() ? csv::format(it->second) : std::string()) << ','
            << (routing.standalone.contains(g) ? 1 : 0) << '\n';
    }
}

inline std::set<GeoId> read_standalone_csv(std::istream& in, std::string_view source = "<standalone.csv>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"geo", "selected"});
    const auto ig = table.index("geo");
    const auto is = table.index("selected");
    std::set<GeoId> out;
    for (const auto& row : table.rows()) {
        if (csv::parse_int(row[is], "selected") == 1) {
            out.insert(GeoId{row[ig]});
        }
    }
    return out;
}

} // namespace argox
