#pragma once

// First step: per-resolution L1-regularised regression of logit %ILI on
// log(1 + search volume), refitted every week on a trailing window.

#include "argox/audit.hpp"
#include "argox/csv.hpp"
#include "argox/enrichment.hpp"
#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/lasso.hpp"
#include "argox/panel.hpp"
#include "argox/parallel.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace argox {

struct FirstStepConfig {
    int window = 104;          ///< training weeks T-N .. T-1
    int national_ar_lags = 52; ///< autoregressive logit-%ILI lags in the national model
    int folds = 10;
    LassoOptions lasso;
};

namespace detail {

/// Fits one lasso nowcast of `ili_column` at week `week` and returns the
/// estimate in percent. `features` may be null (pure autoregression).
inline double nowcast(const FeaturePanel* features, const WeeklyPanel& ili, const std::string& ili_column,
                      EpiWeek week, int ar_lags, const FirstStepConfig& cfg, LookaheadAudit* audit,
                      const std::string& label)
{
    const int n = cfg.window;
    if (n < 2) {
        throw DataError("first-step window must be at least 2 weeks");
    }
    const auto col = ili.require_column(ili_column);
    const auto last = ili.row_of(week.prev());
    const auto first = ili.row_of(week - (n + ar_lags));
    if (!last || !first || *last - *first != n + ar_lags - 1) {
        throw DataError("insufficient %ILI history for " + ili_column + " at " + week.str() + " (needs " +
                        std::to_string(n + ar_lags) + " prior weeks)");
    }
    const Eigen::Index feature_count = features ? features->cols() : 0;
    Eigen::Index feature_row0 = 0;
    if (features) {
        const auto f0 = features->row_of(week - n);
        const auto f1 = features->row_of(week);
        if (!f0 || !f1 || *f1 - *f0 != n) {
            throw DataError("search data for " + label + " does not cover " + (week - n).str() + ".." +
                            week.str());
        }
        feature_row0 = *f0;
    }

    // Row i of the design is week T-N+i; row N is the prediction row for T.
    auto logit_at = [&](Eigen::Index row) { return logit(ili.values()(row, col)); };
    const Eigen::Index ili_row0 = *last - n + 1;
    Eigen::MatrixXd x(n + 1, feature_count + ar_lags);
    for (Eigen::Index i = 0; i <= n; ++i) {
        if (features) {
            x.row(i).head(feature_count) = features->values().row(feature_row0 + i);
        }
        for (int lag = 1; lag <= ar_lags; ++lag) {
            x(i, feature_count + lag - 1) = logit_at(ili_row0 + i - lag);
        }
    }
    DesignMatrix design{x.topRows(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        design.y(i) = logit_at(ili_row0 + i);
    }
    design.validate();
    const Eigen::VectorXd target_row = x.row(n).transpose();

    if (audit) {
        audit->record(label, week, ili.index()[static_cast<std::size_t>(*last)],
                      features ? std::optional<EpiWeek>(features->index()[static_cast<std::size_t>(feature_row0 + n)])
                               : std::nullopt);
    }

    double y_hat = design.y.mean();
    if (design.x.cols() > 0 && lambda_max(design) > 0.0) {
        const int folds = std::min<int>(cfg.folds, n);
        const double lambda = cv_lambda(design, folds, cfg.lasso);
        y_hat = predict(fit_lasso(design, lambda, cfg.lasso), target_row);
    }
    return clamp_percent(inv_logit(y_hat));
}

} // namespace detail

/// Raw state-level nowcast for `geo` at `week` from its (enriched or raw)
/// search features.
inline double fit_state_first_step(const GeoId& geo, const EnrichedFeatures& features, const WeeklyPanel& ili,
                                   EpiWeek week, const FirstStepConfig& cfg = {}, LookaheadAudit* audit = nullptr)
{
    const auto it = features.find(geo.str());
    if (it == features.end()) {
        throw DataError("no search features for " + geo.str());
    }
    return detail::nowcast(&it->second.features, ili, geo.str(), week, 0, cfg, audit, "state:" + geo.str());
}

/// National nowcast: search features plus autoregressive lags of logit %ILI.
inline double fit_national_first_step(const FeaturePanel& national_features, const WeeklyPanel& ili, EpiWeek week,
                                      const FirstStepConfig& cfg = {}, LookaheadAudit* audit = nullptr)
{
    return detail::nowcast(&national_features, ili, kNational.str(), week, cfg.national_ar_lags, cfg, audit,
                           "national");
}

/// Regional nowcast from the reconstructed regional search series.
inline double fit_regional_first_step(const GeoId& region, const FeaturePanel& regional_features,
                                      const WeeklyPanel& ili, EpiWeek week, const FirstStepConfig& cfg = {},
                                      LookaheadAudit* audit = nullptr)
{
    return detail::nowcast(&regional_features, ili, region.str(), week, 0, cfg, audit, "region:" + region.str());
}

/// Everything the first step reads, prepared once per run.
struct FirstStepInputs {
    GeoRegistry registry;
    WeeklyPanel ili;
    EnrichedFeatures states;
    std::map<std::string, FeaturePanel> regions;
    FeaturePanel national;
};

inline FirstStepInputs prepare_first_step_inputs(const GeoRegistry& registry, const WeeklyPanel& ili,
                                                 const TrendsPanels& trends, bool enrichment = true)
{
    TrendsPanels state_panels;
    for (const auto& g : registry.states()) {
        const auto it = trends.find(g.str());
        if (it == trends.end()) {
            throw DataError("no search data for " + g.str());
        }
        state_panels.emplace(g.str(), it->second);
    }
    const auto national = trends.find(kNational.str());
    if (national == trends.end()) {
        throw DataError("no national (US) search data");
    }
    FirstStepInputs in{registry, ili, enrich_state_features(state_panels, registry, enrichment), {},
                       log1p_features(national->second)};
    for (const auto& [region, panel] : reconstruct_regional_series(state_panels, registry)) {
        in.regions.emplace(region, log1p_features(panel));
    }
    return in;
}

/// Raw estimates of one week at all three resolutions. Vectors follow
/// registry state order and registry region order.
struct FirstStepOutput {
    EpiWeek week;
    Eigen::VectorXd state_raw;
    Eigen::VectorXd regional;
    double national = 0.0;
};

class FirstStepPanel {
public:
    FirstStepPanel() = default;
    FirstStepPanel(std::vector<GeoId> states, std::vector<GeoId> regions, std::vector<FirstStepOutput> rows)
        : states_(std::move(states)), regions_(std::move(regions)), rows_(std::move(rows))
    {
        for (std::size_t i = 1; i < rows_.size(); ++i) {
            if (!(rows_[i - 1].week < rows_[i].week)) {
                throw DataError("first-step panel weeks not strictly increasing");
            }
        }
    }

    const std::vector<GeoId>& states() const { return states_; }
    const std::vector<GeoId>& regions() const { return regions_; }
    const std::vector<FirstStepOutput>& rows() const { return rows_; }

    const FirstStepOutput* find(EpiWeek w) const
    {
        const auto it = std::lower_bound(rows_.begin(), rows_.end(), w,
                                         [](const FirstStepOutput& r, EpiWeek k) { return r.week < k; });
        return it != rows_.end() && it->week == w ? &*it : nullptr;
    }

    const FirstStepOutput& at(EpiWeek w) const
    {
        if (const auto* r = find(w)) {
            return *r;
        }
        throw DataError("no first-step estimates for " + w.str());
    }

    /// State-level raw estimate for `geo`.
    double state(EpiWeek w, const GeoId& geo) const { return at(w).state_raw(position(states_, geo)); }

    double region(EpiWeek w, const GeoId& r) const { return at(w).regional(position(regions_, r)); }

private:
    static Eigen::Index position(const std::vector<GeoId>& v, const GeoId& g)
    {
        const auto it = std::find(v.begin(), v.end(), g);
        if (it == v.end()) {
            throw DataError("geography " + g.str() + " not in first-step panel");
        }
        return it - v.begin();
    }

    std::vector<GeoId> states_;
    std::vector<GeoId> regions_;
    std::vector<FirstStepOutput> rows_;
};

/// Rolling-origin first step: every model is refitted for each requested
/// week on the window that ends the week before.
inline FirstStepPanel first_step_panel(const FirstStepInputs& in, const std::vector<EpiWeek>& weeks,
                                       const FirstStepConfig& cfg = {}, LookaheadAudit* audit = nullptr,
                                       unsigned threads = 1)
{
    const auto states = in.registry.states();
    const auto& regions = in.registry.regions();
    const std::size_t per_week = states.size() + regions.size() + 1;
    std::vector<FirstStepOutput> rows(weeks.size());
    for (std::size_t w = 0; w < weeks.size(); ++w) {
        rows[w].week = weeks[w];
        rows[w].state_raw.resize(static_cast<Eigen::Index>(states.size()));
        rows[w].regional.resize(static_cast<Eigen::Index>(regions.size()));
    }
    parallel_for(weeks.size() * per_week, threads, [&](std::size_t task) {
        const std::size_t w = task / per_week;
        const std::size_t k = task % per_week;
        const EpiWeek week = weeks[w];
        std::string where;
        try {
            if (k < states.size()) {
                where = states[k].str();
                rows[w].state_raw(static_cast<Eigen::Index>(k)) =
                    fit_state_first_step(states[k], in.states, in.ili, week, cfg, audit);
            } else if (k < states.size() + regions.size()) {
                const auto& r = regions[k - states.size()];
                where = r.str();
                const auto it = in.regions.find(r.str());
                if (it == in.regions.end()) {
                    throw DataError("no regional search series");
                }
                rows[w].regional(static_cast<Eigen::Index>(k - states.size())) =
                    fit_regional_first_step(r, it->second, in.ili, week, cfg, audit);
            } else {
                where = kNational.str();
                rows[w].national = fit_national_first_step(in.national, in.ili, week, cfg, audit);
            }
        } catch (const Error& e) {
            throw Error("first step failed for " + where + " at " + week.str() + ": " + e.what());
        }
    });
    return FirstStepPanel(states, regions, std::move(rows));
}

/// Cache format: `year,week,geo,estimate`, one row per (week, geography).
inline void write_first_step_cache(std::ostream& out, const FirstStepPanel& panel)
{
    out << "year,week,geo,estimate\n";
    for (const auto& r : panel.rows()) {
        auto row = [&](const std::string& geo, double v) {
            out << r.week.year << ',' << r.week.week << ',' << geo << ',' << csv::format(v) << '\n';
        };
        for (std::size_t i = 0; i < panel.states().size(); ++i) {
            row(panel.states()[i].str(), r.state_raw(static_cast<Eigen::Index>(i)));
        }
        for (std::size_t i = 0; i < panel.regions().size(); ++i) {
            row(panel.regions()[i].str(), r.regional(static_cast<Eigen::Index>(i)));
        }
        row(kNational.str(), r.national);
    }
}

inline FirstStepPanel read_first_step_cache(std::istream& in, const GeoRegistry& registry,
                                            std::string_view source = "<first-step cache>")
{
    const auto table = csv::Table::read(in, source);
    table.require({"year", "week", "geo", "estimate"});
    const auto iy = table.index("year");
    const auto iw = table.index("week");
    const auto ig = table.index("geo");
    const auto iv = table.index("estimate");
    const auto states = registry.states();
    const auto& regions = registry.regions();
    std::map<EpiWeek, std::map<std::string, double>> cells;
    for (const auto& row : table.rows()) {
        const auto week = EpiWeek::checked(csv::parse_int(row[iy], "year"), csv::parse_int(row[iw], "week"));
        if (!cells[week].emplace(row[ig], csv::parse_double(row[iv], "estimate")).second) {
            throw DataError(std::string(source) + ": duplicate entry for " + row[ig] + " at " + week.str());
        }
    }
    std::vector<FirstStepOutput> rows;
    for (const auto& [week, values] : cells) {
        auto get = [&](const std::string& geo) {
            const auto it = values.find(geo);
            if (it == values.end()) {
                throw DataError(std::string(source) + ": missing " + geo + " at " + week.str());
            }
            return it->second;
        };
        FirstStepOutput out{week, Eigen::VectorXd(static_cast<Eigen::Index>(states.size())),
                            Eigen::VectorXd(static_cast<Eigen::Index>(regions.size())), get(kNational.str())};
        for (std::size_t i = 0; i < states.size(); ++i) {
            out.state_raw(static_cast<Eigen::Index>(i)) = get(states[i].str());
        }
        for (std::size_t i = 0; i < regions.size(); ++i) {
            out.regional(static_cast<Eigen::Index>(i)) = get(regions[i].str());
        }
        rows.push_back(std::move(out));
    }
    return FirstStepPanel(states, regions, std::move(rows));
}

} // namespace argox
