#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace argox;
namespace fs = std::filesystem;

namespace {

// Small world: 5 states in 2 regions, the last one stand-alone, with a
// 20-week training window so that a 30-week backtest runs in seconds.
class BacktestFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        root_ = fs::temp_directory_path() / "argox_backtest_test";
        fs::remove_all(root_);
        SyntheticConfig s;
        s.seed = 7;
        s.geos = 5;
        s.regions = 2;
        s.standalone = 1;
        s.weeks = 80;
        s.terms = 6;
        s.informative_terms = 4;
        write_synthetic(generate_synthetic(s), (root_ / "data").string());
        synth_start_ = s.start;
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }

    static BacktestConfig config()
    {
        BacktestConfig c;
        c.ili = (root_ / "data" / "ili.csv").string();
        c.trends_dir = (root_ / "data" / "trends").string();
        c.registry = (root_ / "data" / "registry.csv").string();
        c.window = 20;
        c.national_ar_lags = 4;
        c.folds = 5;
        c.start = synth_start_ + 40;
        c.end = c.start + 29;
        return c;
    }

    static inline fs::path root_;
    static inline EpiWeek synth_start_;
};

std::size_t count_method(const std::vector<EstimateRecord>& records, const std::string& method)
{
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.method == method; }));
}

} // namespace

TEST_F(BacktestFixture, RecordsPerMethodAndProvenance)
{
    const auto cfg = config();
    const auto result = run_backtest(cfg, load_backtest_data(cfg));
    EXPECT_EQ(count_method(result.records, "argox"), 30u * 5u);
    EXPECT_EQ(count_method(result.records, "naive"), 30u * 5u);
    EXPECT_EQ(count_method(result.records, "var1"), 30u * 5u);
    for (const auto& r : result.records) {
        if (r.method != "argox") {
            continue;
        }
        EXPECT_EQ(r.provenance, r.geo == "S05" ? "standalone" : "joint");
        ASSERT_TRUE(r.lo && r.hi);
        EXPECT_LE(*r.lo, r.point);
        EXPECT_LE(r.point, *r.hi);
        EXPECT_GE(*r.lo, 0.0);
    }
    EXPECT_EQ(result.diagnostics.size(), 30u);
    EXPECT_GT(result.audited_fits, 0u);
    EXPECT_TRUE(result.audit_violations.empty());
    EXPECT_EQ(result.first_step.rows().size(), 50u);
}

TEST_F(BacktestFixture, ReproducibleAndResolvedConfigRoundTrip)
{
    const auto cfg = config();
    run_backtest_files(cfg, root_ / "out1");
    run_backtest_files(cfg, root_ / "out2");
    const auto resolved = load_config((root_ / "out1" / "resolved_config.json").string());
    run_backtest_files(resolved, root_ / "out3");
    for (const auto* f : {"estimates.csv", "summary.csv", "per_state.csv", "relative_mse.csv", "coverage.csv",
                          "model_diagnostics.csv", "first_step.csv", "audit.json", "resolved_config.json"}) {
        const auto a = test::slurp((root_ / "out1" / f).string());
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, test::slurp((root_ / "out2" / f).string())) << f;
        EXPECT_EQ(a, test::slurp((root_ / "out3" / f).string())) << f;
    }
    const auto audit = nlohmann::json::parse(test::slurp((root_ / "out1" / "audit.json").string()));
    EXPECT_TRUE(audit.at("passed").get<bool>());
}

TEST_F(BacktestFixture, ThreadCountDoesNotChangeOutputs)
{
    auto cfg = config();
    cfg.end = cfg.start + 5;
    const auto data = load_backtest_data(cfg);
    const auto one = run_backtest(cfg, data);
    cfg.threads = 3;
    const auto three = run_backtest(cfg, data);
    std::ostringstream a;
    std::ostringstream b;
    write_estimates_csv(a, one.records);
    write_estimates_csv(b, three.records);
    EXPECT_EQ(a.str(), b.str());
}

TEST_F(BacktestFixture, FirstStepCacheReproducesRun)
{
    auto cfg = config();
    cfg.end = cfg.start + 9;
    run_backtest_files(cfg, root_ / "cache_src");
    auto cached = cfg;
    cached.first_step_cache = (root_ / "cache_src" / "first_step.csv").string();
    run_backtest_files(cached, root_ / "cache_use");
    EXPECT_EQ(test::slurp((root_ / "cache_src" / "estimates.csv").string()),
              test::slurp((root_ / "cache_use" / "estimates.csv").string()));
    EXPECT_FALSE(fs::exists(root_ / "cache_use" / "first_step.csv"));

    // A cache that does not cover the range is rejected.
    cached.end = cfg.end + 1;
    EXPECT_THROW(run_backtest_files(cached, root_ / "cache_bad"), DataError);
}

TEST_F(BacktestFixture, EnrichmentAblationChangesOnlyArgox)
{
    auto cfg = config();
    cfg.end = cfg.start + 9;
    const auto data = load_backtest_data(cfg);
    const auto with = run_backtest(cfg, data);
    cfg.enrichment = false;
    const auto without = run_backtest(cfg, data);
    ASSERT_EQ(with.records.size(), without.records.size());
    bool argox_differs = false;
    for (std::size_t i = 0; i < with.records.size(); ++i) {
        const auto& a = with.records[i];
        const auto& b = without.records[i];
        if (a.method == "argox") {
            argox_differs = argox_differs || a.point != b.point;
        } else {
            EXPECT_EQ(a.point, b.point);
        }
    }
    EXPECT_TRUE(argox_differs);
}

TEST_F(BacktestFixture, ExternalMethodJoinsTruth)
{
    auto cfg = config();
    cfg.end = cfg.start + 4;
    const auto ext = root_ / "external_model.csv";
    {
        std::ofstream out(ext);
        out << "year,week,geo,estimate\n";
        for (const auto& w : week_range(cfg.start - 2, cfg.end + 2)) {
            out << w.year << ',' << w.week << ",S01,1.5\n";
        }
    }
    cfg.methods = {"naive", "external:" + ext.string()};
    const auto result = run_backtest(cfg, load_backtest_data(cfg));
    EXPECT_EQ(count_method(result.records, "external:external_model"), 5u);
    EXPECT_EQ(count_method(result.records, "argox"), 0u);
    EXPECT_TRUE(result.first_step.rows().empty());
    const auto ili = parse_ili_csv(cfg.ili, load_registry(cfg.registry));
    for (const auto& r : result.records) {
        if (r.method.starts_with("external")) {
            EXPECT_EQ(r.point, 1.5);
            EXPECT_EQ(r.truth, ili.at(r.week, "S01"));
        }
    }
}

TEST_F(BacktestFixture, AutoRoutingWritesSelection)
{
    auto cfg = config();
    cfg.end = cfg.start + 2;
    cfg.routing = "auto";
    cfg.standalone_lowest = 2;
    const auto result = run_backtest_files(cfg, root_ / "auto");
    ASSERT_TRUE(result.routing.has_value());
    EXPECT_EQ(result.registry.standalone_set().size(), 2u);
    EXPECT_EQ(result.routing->r2.size(), 5u);
    std::ifstream in(root_ / "auto" / "standalone.csv");
    EXPECT_EQ(read_standalone_csv(in), result.registry.standalone_set());

    // The written selection can be fed back as a routing file.
    auto from_file = cfg;
    from_file.routing = (root_ / "auto" / "standalone.csv").string();
    const auto replay = run_backtest(from_file, load_backtest_data(from_file));
    EXPECT_EQ(replay.registry.standalone_set(), result.registry.standalone_set());

    cfg.in_sample_end = cfg.start;
    EXPECT_THROW(run_backtest(cfg, load_backtest_data(cfg)), DataError);
}

TEST_F(BacktestFixture, FailuresNameTheWeek)
{
    auto cfg = config();
    cfg.start = synth_start_ + 10; // too little history for a 20-week window
    cfg.end = cfg.start + 1;
    cfg.methods = {"var1"};
    try {
        run_backtest(cfg, load_backtest_data(cfg));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("backtest failed at " + cfg.start.str() + " (var1)"),
                  std::string::npos)
            << e.what();
    }
    cfg = config();
    cfg.end = synth_start_ + 200;
    EXPECT_THROW(run_backtest(cfg, load_backtest_data(cfg)), DataError);
}

TEST(BacktestConfig, ParsesAndValidates)
{
    const auto j = nlohmann::json::parse(R"({
        "data": {"ili": "d/ili.csv", "trends_dir": "d/trends"},
        "registry": "/abs/registry.csv",
        "window": 52,
        "range": {"start": "2014w40", "end": "2015w20"},
        "methods": ["argox", "external:ext/model.csv"],
        "in_sample": {"start": "2010w40", "end": "2014w39"},
        "routing": "auto"
    })");
    const auto c = config_from_json(j, "/base");
    EXPECT_EQ(c.ili, "/base/d/ili.csv");
    EXPECT_EQ(c.trends_dir, "/base/d/trends");
    EXPECT_EQ(c.registry, "/abs/registry.csv");
    EXPECT_EQ(c.window, 52);
    EXPECT_EQ(c.start, (EpiWeek{2014, 40}));
    EXPECT_EQ(c.end, (EpiWeek{2015, 20}));
    EXPECT_EQ(c.routing, "auto");
    EXPECT_EQ(c.methods.back(), "external:/base/ext/model.csv");
    EXPECT_EQ(*c.in_sample_end, (EpiWeek{2014, 39}));
    EXPECT_TRUE(c.enrichment);
    EXPECT_EQ(config_from_json(to_json(c)).methods, c.methods);

    auto bad = j;
    bad["range"]["end"] = "2013w01";
    EXPECT_THROW(config_from_json(bad), DataError);
    bad = j;
    bad["methods"] = {"magic"};
    EXPECT_THROW(config_from_json(bad), DataError);
    bad = j;
    bad.erase("registry");
    EXPECT_THROW(config_from_json(bad), DataError);
    bad = j;
    bad["window"] = "wide";
    EXPECT_THROW(config_from_json(bad), DataError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), DataError);
}
