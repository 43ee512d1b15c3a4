#pragma once

// Rolling backtest: for each week in the evaluation range, refit the first
// step on its trailing window, estimate the second-step models on the
// trailing window of first-step estimates, and score ARGOX against the
// benchmarks.

#include "argox/audit.hpp"
#include "argox/error.hpp"
#include "argox/evaluation.hpp"
#include "argox/first_step.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/parallel.hpp"
#include "argox/routing.hpp"
#include "argox/second_step_joint.hpp"
#include "argox/second_step_standalone.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace argox {

struct BacktestConfig {
    std::string ili;        ///< data.ili
    std::string trends_dir; ///< data.trends_dir
    std::string registry;
    int window = 104;
    EpiWeek start;
    EpiWeek end;
    std::string routing = "registry"; ///< "registry", "auto", or a standalone.csv path
    std::optional<EpiWeek> in_sample_start;
    std::optional<EpiWeek> in_sample_end;
    int standalone_lowest = 5;
    bool enrichment = true;
    std::vector<std::string> methods{"argox", "naive", "var1"};
    std::uint64_t seed = 0;
    int national_ar_lags = 52;
    int folds = 10;
    unsigned threads = 1;
    std::string first_step_cache; ///< optional cache to read instead of refitting

    FirstStepConfig first_step() const
    {
        FirstStepConfig fs;
        fs.window = window;
        fs.national_ar_lags = national_ar_lags;
        fs.folds = folds;
        return fs;
    }

    void validate() const
    {
        if (window < 3) {
            throw DataError("config: window must be at least 3 weeks");
        }
        if (end < start) {
            throw DataError("config: range.end precedes range.start");
        }
        if (national_ar_lags < 0 || folds < 2 || standalone_lowest < 0) {
            throw DataError("config: invalid national_ar_lags, folds or standalone_lowest");
        }
        for (const auto& m : methods) {
            if (m != "argox" && m != "naive" && m != "var1" && m.rfind("external:", 0) != 0) {
                throw DataError("config: unknown method '" + m + "'");
            }
        }
    }
};

inline nlohmann::json to_json(const BacktestConfig& c)
{
    nlohmann::json j;
    j["data"]["ili"] = c.ili;
    j["data"]["trends_dir"] = c.trends_dir;
    j["registry"] = c.registry;
    j["window"] = c.window;
    j["range"]["start"] = c.start.str();
    j["range"]["end"] = c.end.str();
    j["routing"] = c.routing;
    if (c.in_sample_start) {
        j["in_sample"]["start"] = c.in_sample_start->str();
    }
    if (c.in_sample_end) {
        j["in_sample"]["end"] = c.in_sample_end->str();
    }
    j["standalone_lowest"] = c.standalone_lowest;
    j["enrichment"] = c.enrichment;
    j["methods"] = c.methods;
    j["seed"] = c.seed;
    j["national_ar_lags"] = c.national_ar_lags;
    j["folds"] = c.folds;
    if (!c.first_step_cache.empty()) {
        j["first_step_cache"] = c.first_step_cache;
    }
    return j;
}

/// Parses a config object. Relative paths are resolved against `base_dir`.
inline BacktestConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    auto path = [&](const std::string& p) -> std::string {
        if (p.empty() || p == "auto" || p == "registry") {
            return p;
        }
        const std::filesystem::path fp(p);
        return fp.is_absolute() || base_dir.empty() ? fp.lexically_normal().string()
                                                    : (base_dir / fp).lexically_normal().string();
    };
    try {
        BacktestConfig c;
        c.ili = path(j.at("data").at("ili").get<std::string>());
        c.trends_dir = path(j.at("data").at("trends_dir").get<std::string>());
        c.registry = path(j.at("registry").get<std::string>());
        c.window = j.value("window", c.window);
        c.start = EpiWeek::parse(j.at("range").at("start").get<std::string>());
        c.end = EpiWeek::parse(j.at("range").at("end").get<std::string>());
        c.routing = path(j.value("routing", c.routing));
        if (j.contains("in_sample")) {
            if (j["in_sample"].contains("start")) {
                c.in_sample_start = EpiWeek::parse(j["in_sample"]["start"].get<std::string>());
            }
            if (j["in_sample"].contains("end")) {
                c.in_sample_end = EpiWeek::parse(j["in_sample"]["end"].get<std::string>());
            }
        }
        c.standalone_lowest = j.value("standalone_lowest", c.standalone_lowest);
        c.enrichment = j.value("enrichment", c.enrichment);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) {
                auto name = m.get<std::string>();
                if (name.rfind("external:", 0) == 0) {
                    name = "external:" + path(name.substr(9));
                }
                c.methods.push_back(name);
            }
        }
        c.seed = j.value("seed", c.seed);
        c.national_ar_lags = j.value("national_ar_lags", c.national_ar_lags);
        c.folds = j.value("folds", c.folds);
        c.first_step_cache = path(j.value("first_step_cache", std::string()));
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid config: ") + e.what());
    }
}

inline BacktestConfig load_config(const std::string& file)
{
    std::ifstream in(file);
    if (!in) {
        throw DataError("cannot open config " + file);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config " + file + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::filesystem::absolute(file).parent_path());
}

struct BacktestData {
    GeoRegistry registry;
    WeeklyPanel ili;
    TrendsPanels trends;
};

inline BacktestData load_backtest_data(const BacktestConfig& cfg)
{
    auto registry = load_registry(cfg.registry);
    auto ili = parse_ili_csv(cfg.ili, registry);
    return {registry, std::move(ili), load_trends_dir(cfg.trends_dir)};
}

struct WeekDiagnostics {
    EpiWeek week;
    ModelDiagnostics joint;
    double standalone_max_jitter = 0.0;
};

struct BacktestResult {
    GeoRegistry registry; ///< with the stand-alone set actually used
    std::optional<Routing> routing;
    FirstStepPanel first_step;
    std::vector<EstimateRecord> records;
    std::vector<WeekDiagnostics> diagnostics;
    SeasonReport report;
    std::size_t audited_fits = 0;
    std::vector<LookaheadAudit::Entry> audit_violations;
};

/// First week where every state-level %ILI series is observed.
inline EpiWeek first_state_week(const WeeklyPanel& ili, const GeoRegistry& registry)
{
    for (Eigen::Index r = 0; r < ili.rows(); ++r) {
        bool all = true;
        for (const auto& s : registry.states()) {
            all = all && std::isfinite(ili.values()(r, ili.require_column(s.str())));
        }
        if (all) {
            return ili.index()[static_cast<std::size_t>(r)];
        }
    }
    throw DataError("no week with complete state-level %ILI");
}

/// Resolves the stand-alone set according to `cfg.routing`.
inline GeoRegistry resolve_routing(const BacktestConfig& cfg, const BacktestData& data, std::optional<Routing>* routing)
{
    if (cfg.routing == "registry") {
        return data.registry;
    }
    if (cfg.routing == "auto") {
        const EpiWeek first = cfg.in_sample_start.value_or(first_state_week(data.ili, data.registry));
        const EpiWeek last = cfg.in_sample_end.value_or(cfg.start.prev());
        if (!(last < cfg.start)) {
            throw DataError("in-sample routing range must end before the evaluation range");
        }
        auto r = route(data.ili, data.registry, first, last, cfg.standalone_lowest);
        auto reg = data.registry.with_standalone(r.standalone);
        if (routing) {
            *routing = std::move(r);
        }
        return reg;
    }
    std::ifstream in(cfg.routing);
    if (!in) {
        throw DataError("cannot open routing file " + cfg.routing);
    }
    return data.registry.with_standalone(read_standalone_csv(in, cfg.routing));
}

inline std::vector<EstimateRecord> load_external_method(const std::string& method, const BacktestConfig& cfg,
                                                        const WeeklyPanel& ili, const GeoRegistry& registry)
{
    const auto file = method.substr(9);
    std::ifstream in(file);
    if (!in) {
        throw DataError("cannot open external estimates " + file);
    }
    const auto name = "external:" + std::filesystem::path(file).stem().string();
    return read_external_estimates(in, name, ili, registry.states(), cfg.start, cfg.end, file);
}

inline BacktestResult run_backtest(const BacktestConfig& cfg, const BacktestData& data,
                                   const FirstStepPanel* cached_first_step = nullptr)
{
    cfg.validate();
    BacktestResult result;
    result.registry = resolve_routing(cfg, data, &result.routing);
    const auto& registry = result.registry;
    const auto states = registry.states();
    std::vector<GeoId> joint_geos;
    std::vector<GeoId> standalone_geos;
    for (const auto& s : states) {
        (registry.is_standalone(s) ? standalone_geos : joint_geos).push_back(s);
    }
    const auto weeks = week_range(cfg.start, cfg.end);
    for (const auto& w : weeks) {
        if (!data.ili.row_of(w)) {
            throw DataError("no %ILI truth for evaluation week " + w.str());
        }
    }
    const bool want_argox = std::find(cfg.methods.begin(), cfg.methods.end(), "argox") != cfg.methods.end();

    LookaheadAudit audit;
    if (want_argox) {
        const auto fs_weeks = week_range(cfg.start - cfg.window, cfg.end);
        if (cached_first_step) {
            for (const auto& w : fs_weeks) {
                cached_first_step->at(w);
            }
            result.first_step = *cached_first_step;
        } else {
            const auto inputs = prepare_first_step_inputs(registry, data.ili, data.trends, cfg.enrichment);
            result.first_step = first_step_panel(inputs, fs_weeks, cfg.first_step(), &audit, cfg.threads);
        }
    }

    // One slot per week so that assembly order does not depend on threads.
    struct WeekOut {
        std::vector<EstimateRecord> records;
        WeekDiagnostics diag;
    };
    std::vector<WeekOut> out(weeks.size());
    parallel_for(weeks.size(), cfg.threads, [&](std::size_t i) {
        const EpiWeek week = weeks[i];
        auto& slot = out[i];
        slot.diag.week = week;
        auto truth = [&](const GeoId& g) { return data.ili.at(week, g.str()); };
        std::string stage;
        try {
            for (const auto& method : cfg.methods) {
                stage = method;
                if (method == "argox") {
                    std::map<GeoId, EstimateRecord> by_geo;
                    if (!joint_geos.empty()) {
                        const auto joint = joint_second_step(week, cfg.window, data.ili, result.first_step, registry,
                                                             joint_geos, &audit);
                        slot.diag.joint = joint.diagnostics;
                        for (std::size_t k = 0; k < joint_geos.size(); ++k) {
                            const auto& iv = joint.intervals[k];
                            by_geo[joint_geos[k]] = {week, joint_geos[k].str(), "argox",
                                                     joint.point(static_cast<Eigen::Index>(k)), iv.lo, iv.hi,
                                                     truth(joint_geos[k]), "joint"};
                        }
                    }
                    for (const auto& g : standalone_geos) {
                        stage = "argox/" + g.str();
                        const auto est =
                            standalone_second_step(g, week, cfg.window, data.ili, result.first_step, &audit);
                        slot.diag.standalone_max_jitter = std::max(slot.diag.standalone_max_jitter, est.jitter);
                        by_geo[g] = {week, g.str(), "argox", est.point, est.lo, est.hi, truth(g), "standalone"};
                    }
                    for (const auto& g : states) {
                        slot.records.push_back(by_geo.at(g));
                    }
                } else if (method == "naive") {
                    for (const auto& g : states) {
                        slot.records.push_back({week, g.str(), "naive", naive_estimate(data.ili, week, g),
                                                std::nullopt, std::nullopt, truth(g), ""});
                    }
                } else if (method == "var1") {
                    const auto est = var1_estimate(data.ili, week, states, cfg.window, &audit);
                    for (std::size_t k = 0; k < states.size(); ++k) {
                        slot.records.push_back({week, states[k].str(), "var1", est(static_cast<Eigen::Index>(k)),
                                                std::nullopt, std::nullopt, truth(states[k]), ""});
                    }
                }
            }
        } catch (const Error& e) {
            throw Error("backtest failed at " + week.str() + " (" + stage + "): " + e.what());
        }
    });
    for (auto& w : out) {
        result.records.insert(result.records.end(), std::make_move_iterator(w.records.begin()),
                              std::make_move_iterator(w.records.end()));
        result.diagnostics.push_back(w.diag);
    }
    for (const auto& method : cfg.methods) {
        if (method.rfind("external:", 0) == 0) {
            auto ext = load_external_method(method, cfg, data.ili, registry);
            result.records.insert(result.records.end(), ext.begin(), ext.end());
        }
    }

    result.audited_fits = audit.count();
    result.audit_violations = audit.violations();
    if (!result.audit_violations.empty()) {
        const auto& v = result.audit_violations.front();
        throw Error("look-ahead audit failed: " + v.what + " at " + v.estimation_week.str() + " read %ILI up to " +
                    v.max_ili_week.str());
    }
    result.report = season_report(result.records);
    return result;
}

inline void write_text(const std::filesystem::path& file, const auto& writer)
{
    std::ofstream out(file);
    if (!out) {
        throw Error("cannot write " + file.string());
    }
    writer(out);
    if (!out) {
        throw Error("failed writing " + file.string());
    }
}

/// Writes the evaluation reports derived from `report` into `dir`.
inline void write_reports(const SeasonReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_text(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, report); });
    write_text(dir / "per_state.csv", [&](std::ostream& o) { write_per_state_csv(o, report); });
    write_text(dir / "relative_mse.csv", [&](std::ostream& o) { write_relative_mse_csv(o, report); });
    write_text(dir / "coverage.csv", [&](std::ostream& o) { write_coverage_csv(o, report); });
    write_text(dir / "summary.json", [&](std::ostream& o) { o << summary_json(report).dump(2) << '\n'; });
}

inline void write_backtest_outputs(const BacktestResult& result, const BacktestConfig& cfg,
                                   const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_text(dir / "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, result.records); });
    write_text(dir / "model_diagnostics.csv", [&](std::ostream& o) {
        o << "year,week,rho,condition,jitter,standalone_max_jitter\n";
        for (const auto& d : result.diagnostics) {
            o << d.week.year << ',' << d.week.week << ',' << csv::format(d.joint.rho) << ','
              << csv::format(d.joint.condition) << ',' << csv::format(d.joint.jitter) << ','
              << csv::format(d.standalone_max_jitter) << '\n';
        }
    });
    if (!result.first_step.rows().empty() && cfg.first_step_cache.empty()) {
        write_text(dir / "first_step.csv", [&](std::ostream& o) { write_first_step_cache(o, result.first_step); });
    }
    if (result.routing) {
        write_text(dir / "standalone.csv",
                   [&](std::ostream& o) { write_standalone_csv(o, *result.routing, result.registry); });
    }
    write_text(dir / "audit.json", [&](std::ostream& o) {
        nlohmann::json j;
        j["fits"] = result.audited_fits;
        j["violations"] = result.audit_violations.size();
        j["passed"] = result.audit_violations.empty() && result.audited_fits > 0;
        o << j.dump(2) << '\n';
    });
    write_text(dir / "resolved_config.json", [&](std::ostream& o) { o << to_json(cfg).dump(2) << '\n'; });
    write_reports(result.report, dir);
}

/// Loads the configured files, runs the backtest and writes every output.
inline BacktestResult run_backtest_files(const BacktestConfig& cfg, const std::filesystem::path& out_dir)
{
    const auto data = load_backtest_data(cfg);
    std::optional<FirstStepPanel> cached;
    if (!cfg.first_step_cache.empty()) {
        std::ifstream in(cfg.first_step_cache);
        if (!in) {
            throw DataError("cannot open first-step cache " + cfg.first_step_cache);
        }
        cached = read_first_step_cache(in, data.registry, cfg.first_step_cache);
    }
    auto result = run_backtest(cfg, data, cached ? &*cached : nullptr);
    write_backtest_outputs(result, cfg, out_dir);
    return result;
}

} // namespace argox
