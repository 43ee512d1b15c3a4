#pragma once

#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/panel.hpp"

#include <map>
#include <string>

namespace argox {

/// Blend weights: state-level frequency vs reconstructed regional frequency.
inline constexpr double kStateWeight = 2.0 / 3.0;
inline constexpr double kRegionWeight = 1.0 / 3.0;

/// Population-weighted average of member-state raw search volumes, per
/// region, per term, per week. Members without search data are skipped and
/// the remaining weights renormalised.
inline TrendsPanels reconstruct_regional_series(const TrendsPanels& state_panels, const GeoRegistry& registry)
{
    TrendsPanels out;
    for (const auto& region : registry.regions()) {
        double total = 0.0;
        for (const auto& s : registry.region_members(region)) {
            if (state_panels.contains(s.str())) {
                total += registry.population(s);
            }
        }
        if (total <= 0.0) {
            throw DataError("region " + region.str() + " has no member search data");
        }
        const WeeklyPanel* shape = nullptr;
        Eigen::MatrixXd acc;
        for (const auto& s : registry.region_members(region)) {
            const auto it = state_panels.find(s.str());
            if (it == state_panels.end()) {
                continue;
            }
            const auto& p = it->second;
            if (shape == nullptr) {
                shape = &p;
                acc = Eigen::MatrixXd::Zero(p.rows(), p.cols());
            } else if (p.index() != shape->index() || p.columns() != shape->columns()) {
                throw DataError("search panels for region " + region.str() + " are not aligned");
            }
            acc += (registry.population(s) / total) * p.values();
        }
        out.emplace(region.str(), WeeklyPanel(shape->index(), shape->columns(), std::move(acc)));
    }
    return out;
}

/// (2/3) state + (1/3) region for pooled states; stand-alone states keep
/// their own series unchanged.
inline WeeklyPanel blend_state_regional(const WeeklyPanel& state, const WeeklyPanel& region, const GeoId& geo,
                                        const GeoRegistry& registry)
{
    if (state.index() != region.index() || state.columns() != region.columns()) {
        throw DataError("blend_state_regional: misaligned state and regional series for " + geo.str());
    }
    if (registry.is_standalone(geo)) {
        return state;
    }
    return WeeklyPanel(state.index(), state.columns(),
                       kStateWeight * state.values() + kRegionWeight * region.values());
}

struct StateFeatures {
    FeaturePanel features; ///< log1p of (possibly blended) volumes
    bool enriched = false;
};

using EnrichedFeatures = std::map<std::string, StateFeatures>;

/// First-step inputs for every state: blend raw volumes with the region's
/// reconstructed series, then take log1p. With `enabled == false` (ablation)
/// every state uses its own raw series.
inline EnrichedFeatures enrich_state_features(const TrendsPanels& state_panels, const GeoRegistry& registry,
                                              bool enabled = true)
{
    const auto regional = reconstruct_regional_series(state_panels, registry);
    EnrichedFeatures out;
    for (const auto& geo : registry.states()) {
        const auto it = state_panels.find(geo.str());
        if (it == state_panels.end()) {
            throw DataError("no search data for " + geo.str());
        }
        const bool blend = enabled && !registry.is_standalone(geo);
        if (blend) {
            const auto& region = regional.at(registry.region_of(geo).str());
            out.emplace(geo.str(),
                        StateFeatures{log1p_features(blend_state_regional(it->second, region, geo, registry)), true});
        } else {
            out.emplace(geo.str(), StateFeatures{log1p_features(it->second), false});
        }
    }
    return out;
}

} // namespace argox
