#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace argox;

namespace {

const GeoRegistry& tiny()
{
    static const GeoRegistry r = test::small_registry(3, 1);
    return r;
}

WeeklyPanel parse_ili(const std::string& body)
{
    std::istringstream in("year,week,geo,ili_percent\n" + body);
    return parse_ili_csv(in, tiny());
}

TrendsPanels parse_trends(const std::string& body)
{
    std::istringstream in("year,week,geo,term,volume\n" + body);
    return parse_trends_csv(in);
}

} // namespace

TEST(IliCsv, MapsRowsToColumns)
{
    const auto p = parse_ili("2014,41,S01,1.8\n2014,41,S02,2.0\n2014,41,S03,0.5\n2014,41,US,1.1\n");
    EXPECT_EQ(p.at(EpiWeek{2014, 41}, "S01"), 1.8);
    EXPECT_EQ(p.at(EpiWeek{2014, 41}, "US"), 1.1);
    EXPECT_EQ(p.columns(), (std::vector<std::string>{"S01", "S02", "S03", "US"}));
}

TEST(IliCsv, RejectsBadRows)
{
    EXPECT_THROW(parse_ili("2014,41,S01,-0.1\n2014,41,S02,1\n2014,41,S03,1\n"), DataError);
    EXPECT_THROW(parse_ili("2014,41,S01,100\n2014,41,S02,1\n2014,41,S03,1\n"), DataError);
    EXPECT_THROW(parse_ili("2014,41,S01,abc\n2014,41,S02,1\n2014,41,S03,1\n"), DataError);
    EXPECT_THROW(parse_ili("2014,41,S01,1\n2014,41,S01,1\n2014,41,S02,1\n2014,41,S03,1\n"), DataError);
    EXPECT_THROW(parse_ili("2014,41,XX,1\n"), DataError);
    // Gap inside the state-level range.
    EXPECT_THROW(parse_ili("2014,41,S01,1\n2014,41,S02,1\n2014,41,S03,1\n2014,42,S01,1\n2014,42,S02,1\n"),
                 DataError);
}

TEST(IliCsv, RejectsFlorida)
{
    const auto reg = load_registry(std::string(ARGOX_DATA_DIR) + "/us_registry.csv");
    std::istringstream in("year,week,geo,ili_percent\n2014,41,FL,1.0\n");
    try {
        parse_ili_csv(in, reg);
        FAIL() << "FL accepted";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("excluded geography"), std::string::npos);
    }
}

TEST(IliCsv, RoundTripReproducesRows)
{
    const std::string body = "2014,40,R1,0.9\n2014,41,R1,1.25\n2014,41,S01,1.8\n2014,41,S02,2\n2014,41,S03,0.5\n"
                              "2014,42,R1,1.3\n2014,42,S01,1.7\n2014,42,S02,2.1\n2014,42,S03,0.01\n";
    const auto p = parse_ili(body);
    EXPECT_TRUE(std::isnan(p.at(EpiWeek{2014, 40}, "S01")));
    std::ostringstream out;
    write_ili_csv(out, p);
    std::istringstream back_in(out.str());
    const auto back = parse_ili_csv(back_in, tiny());
    EXPECT_EQ(back.index(), p.index());
    EXPECT_EQ(back.columns(), p.columns());
    EXPECT_TRUE(back.values().cwiseEqual(p.values()).count() + (p.values().array().isNaN()).count() ==
                p.values().size());
}

TEST(TrendsCsv, VolumesAndZeroFill)
{
    const auto t = parse_trends("2014,41,S01,flu,100\n2014,42,S01,flu,0\n2014,42,S01,fever,3\n2014,42,US,flu,40\n");
    const auto& s = t.at("S01");
    EXPECT_EQ(s.values().maxCoeff(), 100.0);
    EXPECT_EQ(s.at(EpiWeek{2014, 42}, "flu"), 0.0);
    // Terms and weeks missing for a geography are filled with 0.
    EXPECT_EQ(s.at(EpiWeek{2014, 41}, "fever"), 0.0);
    EXPECT_EQ(t.at("US").at(EpiWeek{2014, 41}, "flu"), 0.0);
    EXPECT_EQ(t.at("US").index(), s.index());
    EXPECT_THROW(parse_trends("2014,41,S01,flu,101\n"), DataError);
    EXPECT_THROW(parse_trends("2014,41,S01,flu,-1\n"), DataError);
}

TEST(TrendsCsv, RoundTrip)
{
    const auto t = parse_trends("2014,41,S01,flu,100\n2014,42,S01,fever,3\n2014,42,US,flu,40\n");
    std::ostringstream out;
    write_trends_csv(out, t);
    std::istringstream in(out.str());
    const auto back = parse_trends_csv(in);
    ASSERT_EQ(back.size(), t.size());
    for (const auto& [geo, panel] : t) {
        EXPECT_EQ(back.at(geo).values(), panel.values());
        EXPECT_EQ(back.at(geo).columns(), panel.columns());
    }
}

TEST(Log1p, KnownValues)
{
    Eigen::MatrixXd v(1, 3);
    v << 0.0, std::exp(1.0) - 1.0, 100.0;
    const auto f = log1p_features(test::make_panel(EpiWeek{2014, 1}, {"a", "b", "c"}, v));
    EXPECT_EQ(f.values()(0, 0), 0.0);
    EXPECT_NEAR(f.values()(0, 1), 1.0, 1e-15);
    // ln(101) to 17 digits: 4.6151205168412594509...
    EXPECT_NEAR(f.values()(0, 2), 4.6151205168412594, 1e-14);
    EXPECT_NEAR(f.values()(0, 2), 4.61512, 5e-6);
    v(0, 0) = -1.0;
    EXPECT_THROW(log1p_features(test::make_panel(EpiWeek{2014, 1}, {"a", "b", "c"}, v)), DataError);
}

TEST(Log1p, Monotone)
{
    Eigen::MatrixXd v(101, 1);
    for (int i = 0; i <= 100; ++i) {
        v(i, 0) = i;
    }
    const auto f = log1p_features(test::make_panel(EpiWeek{2012, 1}, {"a"}, v));
    for (int i = 1; i <= 100; ++i) {
        EXPECT_GT(f.values()(i, 0), f.values()(i - 1, 0));
    }
}

TEST(Logit, SymmetryAndInverse)
{
    EXPECT_DOUBLE_EQ(logit(50.0), 0.0);
    EXPECT_NEAR(inv_logit(logit(1.8)), 1.8, 1.8e-12);
    for (double p = 0.01; p < 99.99; p += 0.37) {
        EXPECT_NEAR(inv_logit(logit(p)) / p, 1.0, 1e-12) << p;
    }
}

TEST(Logit, ZeroIsClampedToTheFloor)
{
    EXPECT_EQ(logit(0.0), logit(kIliFloor));
    EXPECT_NEAR(inv_logit(logit(0.0)), kIliFloor, 1e-15);
    EXPECT_THROW(logit(-0.1), DataError);
    EXPECT_THROW(logit(100.0), DataError);
    EXPECT_TRUE(std::isfinite(logit(99.999)));
}

TEST(ZeroFraction, Extremes)
{
    const auto zeros = parse_trends("2014,41,S01,flu,0\n2014,42,S01,flu,0\n2014,42,US,flu,4\n2014,41,US,flu,2\n");
    const auto report = zero_fraction_report(zeros);
    EXPECT_EQ(report.at("S01"), 1.0);
    EXPECT_EQ(report.at("US"), 0.0);
}

TEST(Seasons, SingleSeason)
{
    const auto s = season_slices(week_range(EpiWeek{2014, 40}, EpiWeek{2015, 20}));
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].label, "14-15");
    EXPECT_EQ(s[0].first, (EpiWeek{2014, 40}));
    EXPECT_EQ(s[0].last, (EpiWeek{2015, 20}));
}

TEST(Seasons, TruncatedFinalSeasonAndOffSeasonGap)
{
    const auto idx = week_range(EpiWeek{2014, 41}, EpiWeek{2020, 12});
    const auto s = season_slices(idx);
    ASSERT_EQ(s.size(), 6u);
    EXPECT_EQ(s.front().label, "14-15");
    EXPECT_EQ(s.front().first, (EpiWeek{2014, 41}));
    EXPECT_EQ(s.back().label, "19-20");
    EXPECT_EQ(s.back().last, (EpiWeek{2020, 12}));
    for (const auto& w : idx) {
        int hits = 0;
        for (const auto& slice : s) {
            hits += slice.contains(w);
        }
        EXPECT_EQ(hits, (w.week >= 21 && w.week <= 39) ? 0 : 1) << w.str();
    }
}

TEST(Seasons, EmptyIndex)
{
    EXPECT_TRUE(season_slices({}).empty());
}
