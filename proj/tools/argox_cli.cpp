// argox: command-line front end for the nowcasting pipeline.
//
//   argox synth      --out DIR [--seed N ...]
//   argox ingest     --registry R --ili F --trends-dir D --out DIR
//   argox route      --registry R --ili F --start W --end W --out FILE
//   argox first-step --config C --out FILE
//   argox backtest   --config C --out DIR
//   argox evaluate   --estimates F --out DIR

#include "argox/argox.hpp"

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

template <class Fn>
void write_file(const fs::path& file, Fn&& fn)
{
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file);
    if (!out) {
        throw argox::Error("cannot write " + file.string());
    }
    fn(out);
}

// Flags shared by `first-step` and `backtest`; each one overrides the
// corresponding config key when given.
struct ConfigFlags {
    std::string config;
    std::string ili;
    std::string trends_dir;
    std::string registry;
    int window = 104;
    std::string start;
    std::string end;
    std::string routing;
    std::string in_sample_start;
    std::string in_sample_end;
    int standalone_lowest = 5;
    bool no_enrichment = false;
    std::vector<std::string> methods;
    std::uint64_t seed = 0;
    int national_ar_lags = 52;
    int folds = 10;
    unsigned threads = 1;
    std::string first_step_cache;

    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* app)
    {
        opts["config"] = app->add_option("--config", config, "JSON config file");
        opts["ili"] = app->add_option("--ili", ili, "%ILI CSV (data.ili)");
        opts["trends_dir"] = app->add_option("--trends-dir", trends_dir, "directory of search-volume CSVs");
        opts["registry"] = app->add_option("--registry", registry, "geography registry CSV");
        opts["window"] = app->add_option("--window", window, "training window in weeks");
        opts["start"] = app->add_option("--start", start, "first evaluation week, e.g. 2014w41");
        opts["end"] = app->add_option("--end", end, "last evaluation week");
        opts["routing"] = app->add_option("--routing", routing, "registry, auto, or a standalone.csv path");
        opts["in_sample_start"] = app->add_option("--in-sample-start", in_sample_start, "routing fit start");
        opts["in_sample_end"] = app->add_option("--in-sample-end", in_sample_end, "routing fit end");
        opts["standalone_lowest"] =
            app->add_option("--standalone-lowest", standalone_lowest, "lowest-R2 states routed stand-alone");
        opts["no_enrichment"] = app->add_flag("--no-enrichment", no_enrichment, "disable regional enrichment");
        opts["methods"] = app->add_option("--methods", methods, "argox naive var1 external:<csv>");
        opts["seed"] = app->add_option("--seed", seed, "random seed");
        opts["national_ar_lags"] = app->add_option("--national-ar-lags", national_ar_lags, "national AR lags");
        opts["folds"] = app->add_option("--folds", folds, "cross-validation folds");
        opts["threads"] = app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        opts["first_step_cache"] =
            app->add_option("--first-step-cache", first_step_cache, "precomputed first-step estimates");
    }

    bool given(const std::string& key) const { return opts.at(key)->count() > 0; }

    argox::BacktestConfig resolve() const
    {
        nlohmann::json j = nlohmann::json::object();
        fs::path base;
        if (given("config")) {
            std::ifstream in(config);
            if (!in) {
                throw argox::DataError("cannot open config " + config);
            }
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw argox::DataError("config " + config + " is not valid JSON: " + e.what());
            }
            base = fs::absolute(config).parent_path();
        }
        // Command-line paths are relative to the working directory.
        auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
        if (given("ili")) j["data"]["ili"] = abs(ili);
        if (given("trends_dir")) j["data"]["trends_dir"] = abs(trends_dir);
        if (given("registry")) j["registry"] = abs(registry);
        if (given("window")) j["window"] = window;
        if (given("start")) j["range"]["start"] = start;
        if (given("end")) j["range"]["end"] = end;
        if (given("routing")) j["routing"] = (routing == "auto" || routing == "registry") ? routing : abs(routing);
        if (given("in_sample_start")) j["in_sample"]["start"] = in_sample_start;
        if (given("in_sample_end")) j["in_sample"]["end"] = in_sample_end;
        if (given("standalone_lowest")) j["standalone_lowest"] = standalone_lowest;
        if (no_enrichment) j["enrichment"] = false;
        if (given("methods")) {
            j["methods"] = nlohmann::json::array();
            for (const auto& m : methods) {
                j["methods"].push_back(m.rfind("external:", 0) == 0 ? "external:" + abs(m.substr(9)) : m);
            }
        }
        if (given("seed")) j["seed"] = seed;
        if (given("national_ar_lags")) j["national_ar_lags"] = national_ar_lags;
        if (given("folds")) j["folds"] = folds;
        if (given("first_step_cache")) j["first_step_cache"] = abs(first_step_cache);
        auto cfg = argox::config_from_json(j, base);
        cfg.threads = threads;
        return cfg;
    }
};

int run_synth(const argox::SyntheticConfig& cfg, const std::string& out, int window)
{
    const auto data = argox::generate_synthetic(cfg);
    argox::write_synthetic(data, out);
    // A ready-to-run backtest config over the weeks that have two full
    // windows of history behind them.
    argox::BacktestConfig bc;
    bc.ili = "ili.csv";
    bc.trends_dir = "trends";
    bc.registry = "registry.csv";
    bc.window = window;
    bc.start = cfg.start + 2 * window;
    bc.end = cfg.start + (cfg.weeks - 1);
    bc.seed = cfg.seed;
    if (bc.end < bc.start) {
        bc.start = bc.end;
    }
    write_file(fs::path(out) / "config.json", [&](std::ostream& o) { o << argox::to_json(bc).dump(2) << '\n'; });
    std::cout << "wrote synthetic data for " << cfg.geos << " states to " << out << '\n';
    return 0;
}

int run_ingest(const std::string& registry_file, const std::string& ili_file, const std::string& trends_dir,
               const std::string& out)
{
    const auto registry = argox::load_registry(registry_file);
    const auto ili = argox::parse_ili_csv(ili_file, registry);
    const auto trends = argox::load_trends_dir(trends_dir);
    const fs::path dir(out);
    write_file(dir / "registry.csv", [&](std::ostream& o) { argox::write_registry(o, registry); });
    write_file(dir / "ili.csv", [&](std::ostream& o) { argox::write_ili_csv(o, ili); });
    write_file(dir / "trends" / "trends.csv", [&](std::ostream& o) { argox::write_trends_csv(o, trends); });
    write_file(dir / "zero_fraction.csv", [&](std::ostream& o) {
        o << "geo,zero_fraction\n";
        for (const auto& [geo, z] : argox::zero_fraction_report(trends)) {
            o << geo << ',' << argox::csv::format(z) << '\n';
        }
    });
    write_file(dir / "seasons.csv", [&](std::ostream& o) {
        o << "season,first,last\n";
        for (const auto& s : argox::season_slices(ili.index())) {
            o << s.label << ',' << s.first.str() << ',' << s.last.str() << '\n';
        }
    });
    std::cout << "ingested " << ili.rows() << " weeks x " << ili.cols() << " %ILI series and " << trends.size()
              << " search panels\n";
    return 0;
}

int run_route(const std::string& registry_file, const std::string& ili_file, const std::string& start,
              const std::string& end, int lowest, const std::string& out)
{
    const auto registry = argox::load_registry(registry_file);
    const auto ili = argox::parse_ili_csv(ili_file, registry);
    const auto routing =
        argox::route(ili, registry, argox::EpiWeek::parse(start), argox::EpiWeek::parse(end), lowest);
    write_file(out, [&](std::ostream& o) { argox::write_standalone_csv(o, routing, registry); });
    std::cout << "stand-alone:";
    for (const auto& g : routing.standalone) {
        std::cout << ' ' << g.str();
    }
    std::cout << '\n';
    return 0;
}

int run_first_step(const argox::BacktestConfig& cfg, const std::string& out)
{
    const auto data = argox::load_backtest_data(cfg);
    std::optional<argox::Routing> routing;
    const auto registry = argox::resolve_routing(cfg, data, &routing);
    const auto inputs = argox::prepare_first_step_inputs(registry, data.ili, data.trends, cfg.enrichment);
    argox::LookaheadAudit audit;
    const auto panel = argox::first_step_panel(inputs, argox::week_range(cfg.start - cfg.window, cfg.end),
                                               cfg.first_step(), &audit, cfg.threads);
    if (!audit.passed()) {
        throw argox::Error("look-ahead audit failed in first step");
    }
    write_file(out, [&](std::ostream& o) { argox::write_first_step_cache(o, panel); });
    std::cout << "wrote " << panel.rows().size() << " weeks of first-step estimates to " << out << '\n';
    return 0;
}

int run_backtest(const argox::BacktestConfig& cfg, const std::string& out)
{
    const auto result = argox::run_backtest_files(cfg, out);
    std::cout << "backtest " << cfg.start.str() << ".." << cfg.end.str() << ": " << result.records.size()
              << " records, " << result.audited_fits << " audited fits, 0 look-ahead violations\n";
    for (const auto& row : result.report.summary) {
        if (row.period == "whole") {
            std::cout << "  " << row.method << ": mse " << argox::csv::format(row.mse) << '\n';
        }
    }
    return 0;
}

int run_evaluate(const std::string& estimates, const std::string& baseline, const std::string& out)
{
    std::ifstream in(estimates);
    if (!in) {
        throw argox::DataError("cannot open " + estimates);
    }
    const auto records = argox::read_estimates_csv(in, estimates);
    argox::write_reports(argox::season_report(records, baseline), out);
    std::cout << "wrote reports for " << records.size() << " records to " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ARGOX influenza nowcasting pipeline"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic surveillance world");
    argox::SyntheticConfig scfg;
    std::string synth_out;
    int synth_window = 104;
    double zero_inflation = scfg.state_zero_inflation;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", scfg.seed, "random seed");
    synth->add_option("--geos", scfg.geos, "number of states");
    synth->add_option("--regions", scfg.regions, "number of regions");
    synth->add_option("--weeks", scfg.weeks, "weeks of state-level data");
    synth->add_option("--history-weeks", scfg.history_weeks, "extra weeks of regional/national history");
    synth->add_option("--spatial-correlation", scfg.spatial_correlation, "cross-state anomaly correlation");
    synth->add_option("--search-noise", scfg.search_noise, "sd of log search-volume noise");
    synth->add_option("--zero-inflation", zero_inflation, "state zero-inflation rate");
    synth->add_option("--national-zero-inflation", scfg.national_zero_inflation, "national zero-inflation rate");
    synth->add_option("--standalone", scfg.standalone, "states flagged stand-alone in the registry");
    synth->add_option("--window", synth_window, "window used for the emitted config.json");

    auto* ingest = app.add_subcommand("ingest", "validate and normalise raw inputs");
    std::string in_registry, in_ili, in_trends, in_out;
    ingest->add_option("--registry", in_registry)->required();
    ingest->add_option("--ili", in_ili)->required();
    ingest->add_option("--trends-dir", in_trends)->required();
    ingest->add_option("--out", in_out, "output directory")->required();

    auto* route = app.add_subcommand("route", "select stand-alone states by multiple correlation");
    std::string r_registry, r_ili, r_start, r_end, r_out;
    int r_lowest = 5;
    route->add_option("--registry", r_registry)->required();
    route->add_option("--ili", r_ili)->required();
    route->add_option("--start", r_start, "first in-sample week")->required();
    route->add_option("--end", r_end, "last in-sample week")->required();
    route->add_option("--lowest", r_lowest, "lowest-R2 contiguous states to route");
    route->add_option("--out", r_out, "standalone.csv to write")->required();

    auto* first = app.add_subcommand("first-step", "compute and cache first-step estimates");
    ConfigFlags first_flags;
    first_flags.attach(first);
    std::string first_out;
    first->add_option("--out", first_out, "first-step CSV to write")->required();

    auto* backtest = app.add_subcommand("backtest", "run the rolling backtest");
    ConfigFlags bt_flags;
    bt_flags.attach(backtest);
    std::string bt_out;
    backtest->add_option("--out", bt_out, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score an estimates.csv");
    std::string ev_in, ev_out, ev_baseline = "naive";
    evaluate->add_option("--estimates", ev_in)->required();
    evaluate->add_option("--baseline", ev_baseline, "method used as the relative-MSE denominator");
    evaluate->add_option("--out", ev_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            scfg.state_zero_inflation = zero_inflation;
            return run_synth(scfg, synth_out, synth_window);
        }
        if (ingest->parsed()) {
            return run_ingest(in_registry, in_ili, in_trends, in_out);
        }
        if (route->parsed()) {
            return run_route(r_registry, r_ili, r_start, r_end, r_lowest, r_out);
        }
        if (first->parsed()) {
            return run_first_step(first_flags.resolve(), first_out);
        }
        if (backtest->parsed()) {
            return run_backtest(bt_flags.resolve(), bt_out);
        }
        if (evaluate->parsed()) {
            return run_evaluate(ev_in, ev_baseline, ev_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "argox: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
