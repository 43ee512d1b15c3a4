#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace argox;

namespace {

StandaloneModel random_model(std::mt19937_64& rng)
{
    const Eigen::MatrixXd joint = 0.05 * test::random_spd(rng, 4, 0.2);
    StandaloneModel m;
    m.mu_z = 0.01;
    m.mu_w = Eigen::Vector3d(0.02, -0.01, 0.03);
    m.sigma_zz = joint(0, 0);
    m.sigma_zw = joint.block<1, 3>(0, 1);
    m.sigma_ww = joint.block<3, 3>(1, 1);
    m.d_ww = m.sigma_ww.diagonal();
    return m;
}

} // namespace

TEST(StandaloneStack, Components)
{
    const auto reg = test::small_registry(2, 1, {1});
    Eigen::MatrixXd v(4, 4);
    v << 1, 1, 1, 1, 2, 2, 2, 2, 2.5, 2.5, 2.5, 2.5, 3, 3, 3, 3;
    const auto ili = test::make_panel(EpiWeek{2016, 1}, {"S01", "S02", "R1", "US"}, v);
    std::vector<FirstStepOutput> rows;
    for (int t = 0; t < 4; ++t) {
        rows.push_back({EpiWeek{2016, 1} + t, Eigen::Vector2d(0.0, 2.5), Eigen::VectorXd::Constant(1, 99.0), 2.5});
    }
    const FirstStepPanel fs(reg.states(), reg.regions(), rows);
    // Flat week-over-week, perfect state and national estimates: zero stack.
    Eigen::MatrixXd flat = v;
    flat(1, 1) = 2.5;
    const auto flat_ili = test::make_panel(EpiWeek{2016, 1}, {"S01", "S02", "R1", "US"}, flat);
    EXPECT_EQ(standalone_stack(GeoId{"S02"}, EpiWeek{2016, 4}, flat_ili, fs), Eigen::Vector3d::Zero());
    const auto w = standalone_stack(GeoId{"S02"}, EpiWeek{2016, 4}, ili, fs);
    EXPECT_EQ(w, Eigen::Vector3d(0.5, 0.0, 0.0));
}

TEST(StandaloneEstimate, MatchesGenericSolve)
{
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const auto m = random_model(rng);
        const Eigen::Vector3d w = m.mu_w + 0.1 * test::random_matrix(rng, 3, 1).col(0);
        const double p_prev = 2.0;
        const auto est = standalone_estimate(m, w, p_prev);
        Eigen::Matrix3d sys = m.sigma_ww;
        sys += Eigen::Matrix3d(m.d_ww.asDiagonal());
        const Eigen::Vector3d x = sys.fullPivLu().solve(m.sigma_zw.transpose());
        const double point = p_prev + m.mu_z + x.dot(w - m.mu_w);
        const double var = m.sigma_zz - 0.5 * m.sigma_zw.dot(x);
        EXPECT_LT(test::rel_err(est.point, point), 1e-12);
        EXPECT_LT(test::rel_err(est.variance, var), 1e-12);
        EXPECT_LT(test::rel_err(est.hi, point + 1.96 * std::sqrt(std::max(var, 0.0))), 1e-12);
    }
}

TEST(StandaloneEstimate, ZeroCrossCovariance)
{
    std::mt19937_64 rng(2);
    auto m = random_model(rng);
    m.sigma_zw.setZero();
    const auto est = standalone_estimate(m, Eigen::Vector3d(5, -5, 5), 1.5);
    EXPECT_DOUBLE_EQ(est.point, 1.5 + m.mu_z);
    EXPECT_NEAR(est.hi - est.point, 1.96 * std::sqrt(m.sigma_zz), 1e-15);
}

TEST(StandaloneEstimate, AgreesWithTheMatrixPredictor)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const auto m = random_model(rng);
        const Eigen::Vector3d w = m.mu_w + 0.1 * test::random_matrix(rng, 3, 1).col(0);
        const ShrunkPredictor p(Eigen::VectorXd::Constant(1, m.mu_z), m.mu_w, Eigen::MatrixXd::Constant(1, 1, m.sigma_zz),
                                m.sigma_zw, m.sigma_ww, m.d_ww);
        const auto est = standalone_estimate(m, w, 2.0);
        EXPECT_NEAR(est.point, 2.0 + p.increment(w)(0), 1e-12);
        EXPECT_NEAR(est.variance, p.conditional_variance()(0), 1e-12);
    }
}

TEST(StandaloneModel, SampleMoments)
{
    std::mt19937_64 rng(4);
    const Eigen::VectorXd z = test::random_matrix(rng, 30, 1).col(0);
    const Eigen::MatrixXd w = test::random_matrix(rng, 30, 3);
    const auto m = estimate_standalone_model(z, w);
    Eigen::MatrixXd joint(30, 4);
    joint << z, w;
    const Eigen::MatrixXd cov = sample_covariance(joint);
    EXPECT_NEAR(m.sigma_zz, cov(0, 0), 1e-15);
    EXPECT_TRUE(m.sigma_zw.isApprox(cov.block(0, 1, 1, 3), 1e-15));
    EXPECT_TRUE(m.sigma_ww.isApprox(cov.block(1, 1, 3, 3), 1e-15));
    EXPECT_EQ(m.d_ww, m.sigma_ww.diagonal());
    EXPECT_THROW(estimate_standalone_model(z.head(1), w.topRows(1)), DataError);
    EXPECT_THROW(estimate_standalone_model(z, w.leftCols(2)), DataError);
}

TEST(StandaloneSecondStep, IgnoresRegionalAndOtherStates)
{
    const auto reg = test::small_registry(3, 1, {2});
    std::mt19937_64 rng(5);
    const int weeks = 50;
    Eigen::MatrixXd v = (test::random_matrix(rng, weeks, 5).array().abs() + 1.0).matrix();
    const auto ili = test::make_panel(EpiWeek{2016, 1}, {"S01", "S02", "S03", "R1", "US"}, v);
    std::vector<FirstStepOutput> rows;
    for (int t = 0; t < weeks; ++t) {
        rows.push_back({EpiWeek{2016, 1} + t, (v.row(t).head(3).array() * 1.1).transpose(),
                        Eigen::VectorXd::Constant(1, v(t, 3)), v(t, 4)});
    }
    const FirstStepPanel fs(reg.states(), reg.regions(), rows);
    const GeoId s3{"S03"};
    const EpiWeek week = EpiWeek{2016, 1} + 45;
    const auto base = standalone_second_step(s3, week, 40, ili, fs);

    auto rows2 = rows;
    Eigen::MatrixXd v2 = v;
    for (auto& r : rows2) {
        r.regional(0) += 3.0;
        r.state_raw(0) *= 0.5;
    }
    v2.col(0).array() += 2.0;
    v2.col(3).array() += 1.0;
    const auto ili2 = test::make_panel(EpiWeek{2016, 1}, {"S01", "S02", "S03", "R1", "US"}, v2);
    const auto moved = standalone_second_step(s3, week, 40, ili2, FirstStepPanel(reg.states(), reg.regions(), rows2));
    EXPECT_EQ(base.point, moved.point);
    EXPECT_EQ(base.lo, moved.lo);
    EXPECT_EQ(base.hi, moved.hi);
}
