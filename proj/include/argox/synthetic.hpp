#pragma once

// Synthetic surveillance world used by tests and the `synth` command.
//
// A latent logit-%ILI field follows a seasonal curve plus a spatially
// correlated AR(1) anomaly. Regional and national %ILI are population
// weighted averages of the states. Each geography gets query-term volumes
// that are noisy monotone transforms of its own latent level (plus some
// uninformative terms), rescaled to a 0-100 maximum, rounded, and
// zero-inflated.

#include "argox/csv.hpp"
#include "argox/epiweek.hpp"
#include "argox/error.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/panel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace argox {

struct SyntheticConfig {
    std::uint64_t seed = 1;
    int geos = 20;
    int regions = 4;
    int weeks = 260;         ///< weeks of state-level data
    int history_weeks = 52;  ///< extra leading weeks of regional/national %ILI
    EpiWeek start{2010, 40}; ///< first week of state-level data
    double spatial_correlation = 0.6;
    double ar_coefficient = 0.8;
    double anomaly_sd = 0.25; ///< stationary sd of the latent anomaly (logit scale)
    int terms = 12;
    int informative_terms = 8;
    double search_noise = 0.3; ///< sd of log-volume noise
    double state_zero_inflation = 0.05;
    double national_zero_inflation = 0.01;
    std::map<int, double> zero_inflation_by_geo; ///< overrides by state index
    std::set<int> isolated;                      ///< state indices with an independent anomaly
    int standalone = 2; ///< last `standalone` states are flagged stand-alone in the registry

    void validate() const
    {
        if (geos < 2 || regions < 1 || regions > 10 || regions > geos) {
            throw DataError("synthetic: need 2 <= geos and 1 <= regions <= min(10, geos)");
        }
        if (weeks < 3 || history_weeks < 0 || terms < 1 || informative_terms < 0 || informative_terms > terms) {
            throw DataError("synthetic: invalid week or term counts");
        }
        if (spatial_correlation < 0.0 || spatial_correlation >= 1.0 || ar_coefficient <= -1.0 ||
            ar_coefficient >= 1.0) {
            throw DataError("synthetic: correlation parameters must lie in [0, 1) and (-1, 1)");
        }
        if (search_noise < 0.0 || anomaly_sd < 0.0) {
            throw DataError("synthetic: noise levels must be non-negative");
        }
        auto bad_rate = [](double z) { return z < 0.0 || z > 1.0; };
        if (bad_rate(state_zero_inflation) || bad_rate(national_zero_inflation)) {
            throw DataError("synthetic: zero-inflation rates must lie in [0, 1]");
        }
        for (const auto& [g, z] : zero_inflation_by_geo) {
            if (g < 0 || g >= geos || bad_rate(z)) {
                throw DataError("synthetic: invalid zero-inflation override");
            }
        }
        if (standalone < 0 || standalone > geos) {
            throw DataError("synthetic: invalid stand-alone count");
        }
    }
};

struct SyntheticData {
    GeoRegistry registry;
    WeeklyPanel ili;     ///< states (weeks from `start`), regions and national (from start - history)
    TrendsPanels trends; ///< states and "US", weeks from `start`
    Eigen::MatrixXd latent; ///< all weeks x states, logit scale
};

inline std::string synthetic_geo_name(int i)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02d", i + 1);
    return buf;
}

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const int g = cfg.geos;
    const int total = cfg.history_weeks + cfg.weeks;
    const EpiWeek first = cfg.start - cfg.history_weeks;
    const auto all_weeks = week_range(first, first + (total - 1));

    // Registry: contiguous blocks of states per region.
    std::vector<GeoRegistry::Entry> entries;
    for (int i = 0; i < g; ++i) {
        const int region = 1 + i * cfg.regions / g;
        entries.push_back({GeoId{synthetic_geo_name(i)}, GeoId{"R" + std::to_string(region)},
                           std::round(5e5 + 9.5e6 * uniform(rng)), i >= g - cfg.standalone});
    }
    GeoRegistry registry(entries);

    // Per-state level and seasonal amplitude; per-season intensity and timing.
    Eigen::VectorXd base(g);
    Eigen::VectorXd amplitude(g);
    for (int i = 0; i < g; ++i) {
        base(i) = logit(1.2) + 0.2 * normal(rng);
        amplitude(i) = 1.3 + 0.15 * normal(rng);
    }
    std::map<int, std::pair<double, double>> season; // season start year -> (intensity, peak shift)
    for (int y = all_weeks.front().year - 1; y <= all_weeks.back().year; ++y) {
        season[y] = {0.7 + 0.6 * uniform(rng), 3.0 * normal(rng)};
    }
    auto seasonal = [&](EpiWeek w, double shift) {
        // Weeks since week 27 of the season's first year; the peak falls near
        // week 6 of the following year.
        const int y = w.week >= 27 ? w.year : w.year - 1;
        const double since = static_cast<double>(w - EpiWeek{y, 27});
        const auto [intensity, peak_shift] = season.at(y);
        const double d = (since - (31.0 + peak_shift + shift)) / 6.0;
        return intensity * std::exp(-d * d);
    };
    Eigen::VectorXd timing(g);
    for (int i = 0; i < g; ++i) {
        timing(i) = cfg.isolated.contains(i) ? 8.0 * normal(rng) : 0.7 * normal(rng);
    }

    // Exchangeable spatial correlation; isolated states are independent.
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(g, g);
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            if (i != j && !cfg.isolated.contains(i) && !cfg.isolated.contains(j)) {
                corr(i, j) = cfg.spatial_correlation;
            }
        }
    }
    const Eigen::MatrixXd chol = corr.llt().matrixL();
    const double innovation = cfg.anomaly_sd * std::sqrt(1.0 - cfg.ar_coefficient * cfg.ar_coefficient);

    Eigen::MatrixXd latent(total, g);
    Eigen::VectorXd anomaly(g);
    for (int i = 0; i < g; ++i) {
        anomaly(i) = normal(rng);
    }
    anomaly = cfg.anomaly_sd * (chol * anomaly);
    for (int t = 0; t < total; ++t) {
        Eigen::VectorXd eps(g);
        for (int i = 0; i < g; ++i) {
            eps(i) = normal(rng);
        }
        anomaly = cfg.ar_coefficient * anomaly + innovation * (chol * eps);
        for (int i = 0; i < g; ++i) {
            latent(t, i) = base(i) + amplitude(i) * seasonal(all_weeks[static_cast<std::size_t>(t)], timing(i)) +
                           anomaly(i);
        }
    }

    // %ILI panel: states, regions, national.
    std::vector<std::string> columns;
    for (const auto& s : registry.states()) {
        columns.push_back(s.str());
    }
    for (const auto& r : registry.regions()) {
        columns.push_back(r.str());
    }
    columns.push_back(kNational.str());
    const auto nr = static_cast<int>(registry.regions().size());
    Eigen::MatrixXd ili = Eigen::MatrixXd::Constant(total, g + nr + 1, std::numeric_limits<double>::quiet_NaN());
    double pop_total = 0.0;
    for (const auto& e : entries) {
        pop_total += e.population;
    }
    for (int t = 0; t < total; ++t) {
        Eigen::VectorXd p(g);
        for (int i = 0; i < g; ++i) {
            p(i) = inv_logit(latent(t, i));
        }
        if (t >= cfg.history_weeks) {
            ili.row(t).head(g) = p.transpose();
        }
        double national = 0.0;
        for (int r = 0; r < nr; ++r) {
            double num = 0.0;
            double den = 0.0;
            for (int i = 0; i < g; ++i) {
                if (entries[static_cast<std::size_t>(i)].region == registry.regions()[static_cast<std::size_t>(r)]) {
                    num += entries[static_cast<std::size_t>(i)].population * p(i);
                    den += entries[static_cast<std::size_t>(i)].population;
                }
            }
            ili(t, g + r) = num / den;
        }
        for (int i = 0; i < g; ++i) {
            national += entries[static_cast<std::size_t>(i)].population * p(i) / pop_total;
        }
        ili(t, g + nr) = national;
    }

    // Search volumes for the state-level weeks only.
    const int tw = cfg.weeks;
    const std::vector<EpiWeek> search_weeks(all_weeks.begin() + cfg.history_weeks, all_weeks.end());
    std::vector<std::string> terms;
    for (int k = 0; k < cfg.terms; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "term%02d", k + 1);
        terms.emplace_back(buf);
    }
    std::vector<double> slope(static_cast<std::size_t>(cfg.terms));
    for (auto& s : slope) {
        s = 0.6 + 0.8 * uniform(rng);
    }
    auto volumes = [&](const Eigen::VectorXd& level, double zero_rate) {
        Eigen::MatrixXd v(tw, cfg.terms);
        for (int k = 0; k < cfg.terms; ++k) {
            double drift = 0.0;
            for (int t = 0; t < tw; ++t) {
                if (k < cfg.informative_terms) {
                    v(t, k) = slope[static_cast<std::size_t>(k)] * level(t) + cfg.search_noise * normal(rng);
                } else {
                    drift = 0.9 * drift + 0.2 * normal(rng);
                    v(t, k) = drift;
                }
            }
            v.col(k) = (v.col(k).array() - v.col(k).maxCoeff()).exp() * 100.0;
            for (int t = 0; t < tw; ++t) {
                v(t, k) = uniform(rng) < zero_rate ? 0.0 : std::round(v(t, k));
            }
        }
        return v;
    };
    TrendsPanels trends;
    for (int i = 0; i < g; ++i) {
        const auto it = cfg.zero_inflation_by_geo.find(i);
        const double z = it != cfg.zero_inflation_by_geo.end() ? it->second : cfg.state_zero_inflation;
        trends.emplace(synthetic_geo_name(i),
                       WeeklyPanel(search_weeks, terms, volumes(latent.col(i).tail(tw), z)));
    }
    Eigen::VectorXd national_level(tw);
    for (int t = 0; t < tw; ++t) {
        national_level(t) = logit(ili(cfg.history_weeks + t, g + nr));
    }
    trends.emplace(kNational.str(), WeeklyPanel(search_weeks, terms, volumes(national_level, cfg.national_zero_inflation)));

    return {registry, WeeklyPanel(all_weeks, columns, std::move(ili)), std::move(trends), std::move(latent)};
}

/// Writes registry.csv, ili.csv and trends/trends.csv under `dir`.
inline void write_synthetic(const SyntheticData& data, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "trends");
    std::ofstream reg(fs::path(dir) / "registry.csv");
    write_registry(reg, data.registry);
    std::ofstream ili(fs::path(dir) / "ili.csv");
    write_ili_csv(ili, data.ili);
    std::ofstream trends(fs::path(dir) / "trends" / "trends.csv");
    write_trends_csv(trends, data.trends);
    if (!reg || !ili || !trends) {
        throw Error("failed writing synthetic data under " + dir);
    }
}

} // namespace argox
