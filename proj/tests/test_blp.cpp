#include "support.hpp"

#include <gtest/gtest.h>

using namespace argox;

TEST(Moments, MeanAndCovariance)
{
    Eigen::MatrixXd obs(4, 2);
    obs << 1, 2, 3, 4, 5, 0, 7, 2;
    EXPECT_TRUE(sample_mean(obs).isApprox(Eigen::Vector2d(4, 2)));
    const auto cov = sample_covariance(obs);
    // Hand-computed with the n-1 denominator.
    EXPECT_NEAR(cov(0, 0), 20.0 / 3.0, 1e-14);
    EXPECT_NEAR(cov(1, 1), 8.0 / 3.0, 1e-14);
    EXPECT_NEAR(cov(0, 1), -4.0 / 3.0, 1e-14);
    EXPECT_THROW(sample_covariance(obs.topRows(1)), DataError);
}

TEST(Moments, CorrelationHandlesZeroVariance)
{
    Eigen::Matrix3d cov;
    cov << 4, 2, 0, 2, 9, 0, 0, 0, 0;
    const auto c = covariance_to_correlation(cov);
    EXPECT_NEAR(c(0, 1), 2.0 / 6.0, 1e-15);
    EXPECT_EQ(c(0, 0), 1.0);
    EXPECT_EQ(c(2, 2), 0.0);
}

TEST(Jitter, PositiveDefiniteNeedsNone)
{
    std::mt19937_64 rng(1);
    const auto m = test::random_spd(rng, 6);
    const auto f = factorize_with_jitter(m);
    EXPECT_EQ(f.jitter, 0.0);
    EXPECT_EQ(f.retries, 0);
}

TEST(Jitter, SingularMatrixGetsJitter)
{
    Eigen::Matrix2d m;
    m << 1, 1, 1, 1;
    const auto f = factorize_with_jitter(m);
    EXPECT_GT(f.retries, 0);
    EXPECT_LE(f.retries, kMaxJitterRetries);
    EXPECT_NEAR(f.jitter, f.retries * kJitterScale, 1e-20);
}

TEST(Jitter, IndefiniteMatrixFails)
{
    Eigen::Matrix2d m;
    m << 1, 0, 0, -1;
    EXPECT_THROW(factorize_with_jitter(m), NumericalError);
    Eigen::Matrix2d nan = Eigen::Matrix2d::Identity();
    nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(factorize_with_jitter(nan), NumericalError);
}

TEST(ShrunkPredictor, MatchesDenseSolve)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index g = 3;
        const Eigen::Index k = 7;
        const auto joint = test::random_spd(rng, g + k);
        const Eigen::MatrixXd szz = joint.topLeftCorner(g, g);
        const Eigen::MatrixXd szw = joint.topRightCorner(g, k);
        const Eigen::MatrixXd sww = joint.bottomRightCorner(k, k);
        const Eigen::VectorXd d = sww.diagonal();
        const Eigen::VectorXd mz = test::random_matrix(rng, g, 1).col(0);
        const Eigen::VectorXd mw = test::random_matrix(rng, k, 1).col(0);
        const Eigen::VectorXd w = test::random_matrix(rng, k, 1).col(0);
        const ShrunkPredictor p(mz, mw, szz, szw, sww, d);

        Eigen::MatrixXd sys = sww;
        sys.diagonal() += d;
        const Eigen::MatrixXd inv = sys.inverse();
        const Eigen::VectorXd expect = mz + szw * inv * (w - mw);
        const Eigen::VectorXd var = (szz - 0.5 * szw * inv * szw.transpose()).diagonal();
        EXPECT_TRUE(p.increment(w).isApprox(expect, 1e-12));
        EXPECT_TRUE(p.conditional_variance().isApprox(var, 1e-12));
        EXPECT_TRUE((p.conditional_variance().array() <= szz.diagonal().array()).all());
        EXPECT_THROW(p.increment(w.head(3)), DataError);
    }
}

TEST(ShrunkPredictor, DimensionChecks)
{
    EXPECT_THROW(ShrunkPredictor(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(2, 2),
                                 Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(3, 3),
                                 Eigen::VectorXd::Ones(3)),
                 DataError);
}

TEST(Minimize, FindsInteriorAndBoundaryMinima)
{
    EXPECT_NEAR(minimize_on_interval([](double x) { return (x - 0.3) * (x - 0.3); }, 0.0, 1.0), 0.3, 1e-6);
    EXPECT_NEAR(minimize_on_interval([](double x) { return x; }, 0.1, 1.0), 0.1, 1e-6);
    EXPECT_NEAR(minimize_on_interval([](double x) { return -x; }, 0.1, 1.0), 1.0, 1e-6);
    // Two local minima; the grid picks the global one.
    auto bimodal = [](double x) { return std::min((x - 0.1) * (x - 0.1) + 0.01, (x - 0.8) * (x - 0.8)); };
    EXPECT_NEAR(minimize_on_interval(bimodal, 0.0, 1.0), 0.8, 1e-6);
}
