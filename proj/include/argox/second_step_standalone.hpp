#pragma once

// Stand-alone second step for geographies modelled without cross-state
// pooling. Predictors are the state's own last increment plus its state and
// national first-step estimates; all moments are unstructured 3x3 sample
// moments.

#include "argox/audit.hpp"
#include "argox/blp.hpp"
#include "argox/error.hpp"
#include "argox/first_step.hpp"
#include "argox/ingestion.hpp"
#include "argox/panel.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace argox {

/// W_t^(m) = (Z_{t-1}, p_hat_GT[m] - p_{t-1}, p_hat_nat - p_{t-1}).
inline Eigen::Vector3d standalone_stack(const GeoId& geo, EpiWeek week, const WeeklyPanel& ili,
                                        const FirstStepPanel& first_step)
{
    const auto prev = ili.row_of(week.prev());
    const auto prev2 = ili.row_of(week - 2);
    if (!prev || !prev2) {
        throw DataError("stand-alone stack for " + geo.str() + " at " + week.str() +
                        " needs %ILI for the two previous weeks");
    }
    const auto col = ili.require_column(geo.str());
    const double p1 = ili.values()(*prev, col);
    const double p2 = ili.values()(*prev2, col);
    return {p1 - p2, first_step.state(week, geo) - p1, first_step.at(week).national - p1};
}

struct StandaloneModel {
    double mu_z = 0.0;
    Eigen::Vector3d mu_w = Eigen::Vector3d::Zero();
    double sigma_zz = 0.0;
    Eigen::RowVector3d sigma_zw = Eigen::RowVector3d::Zero();
    Eigen::Matrix3d sigma_ww = Eigen::Matrix3d::Zero();
    Eigen::Vector3d d_ww = Eigen::Vector3d::Zero(); ///< diagonal of sigma_ww
};

/// Sample moments over a window of increments `z` (n) and stacks `w` (n x 3).
inline StandaloneModel estimate_standalone_model(const Eigen::VectorXd& z, const Eigen::MatrixXd& w)
{
    if (w.rows() != z.size() || w.cols() != 3) {
        throw DataError("stand-alone window has inconsistent shapes");
    }
    if (z.size() < 2) {
        throw DataError("stand-alone training window too short");
    }
    Eigen::MatrixXd joint(z.size(), 4);
    joint << z, w;
    const Eigen::MatrixXd cov = sample_covariance(joint);
    StandaloneModel m;
    m.mu_z = z.mean();
    m.mu_w = w.colwise().mean().transpose();
    m.sigma_zz = cov(0, 0);
    m.sigma_zw = cov.block<1, 3>(0, 1);
    m.sigma_ww = cov.block<3, 3>(1, 1);
    m.d_ww = m.sigma_ww.diagonal();
    return m;
}

struct StandaloneEstimate {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double variance = 0.0; ///< conditional variance before flooring
    double jitter = 0.0;
    double condition = 0.0;
};

/// p_hat = p_{T-1} + mu_Z + S_ZW (S_WW + D_WW)^-1 (W - mu_W) and
/// half-width 1.96 sqrt(S_ZZ - (1/2) S_ZW (S_WW + D_WW)^-1 S_WZ).
inline StandaloneEstimate standalone_estimate(const StandaloneModel& m, const Eigen::Vector3d& w, double p_prev)
{
    Eigen::Matrix3d system = m.sigma_ww;
    system.diagonal() += m.d_ww;
    const auto chol = factorize_with_jitter(system);
    const Eigen::Vector3d weights = chol.solve(m.sigma_zw.transpose());
    StandaloneEstimate out;
    out.point = clamp_percent(p_prev + m.mu_z + weights.dot(w - m.mu_w));
    out.variance = m.sigma_zz - 0.5 * m.sigma_zw.dot(weights);
    const double hw = kZ95 * std::sqrt(std::max(0.0, out.variance));
    out.lo = std::max(0.0, out.point - hw);
    out.hi = out.point + hw;
    out.jitter = chol.jitter;
    out.condition = 1.0 / chol.rcond();
    return out;
}

/// Stand-alone second step for one geography at `week`.
inline StandaloneEstimate standalone_second_step(const GeoId& geo, EpiWeek week, int window, const WeeklyPanel& ili,
                                                 const FirstStepPanel& first_step, LookaheadAudit* audit = nullptr)
{
    Eigen::VectorXd z(window);
    Eigen::MatrixXd w(window, 3);
    const auto col = ili.require_column(geo.str());
    for (int i = 0; i < window; ++i) {
        const EpiWeek t = week - (window - i);
        const auto row = ili.row_of(t);
        const auto prev = ili.row_of(t.prev());
        if (!row || !prev) {
            throw DataError("stand-alone step for " + geo.str() + " at " + week.str() + ": no %ILI at " + t.str());
        }
        z(i) = ili.values()(*row, col) - ili.values()(*prev, col);
        w.row(i) = standalone_stack(geo, t, ili, first_step).transpose();
    }
    const double p_prev = ili.values()(ili.require_row(week.prev()), col);
    const Eigen::Vector3d w_now = standalone_stack(geo, week, ili, first_step);
    if (!z.allFinite() || !w.allFinite() || !std::isfinite(p_prev) || !w_now.allFinite()) {
        throw DataError("stand-alone step for " + geo.str() + " at " + week.str() +
                        ": missing %ILI or first-step value in the window");
    }
    if (audit) {
        audit->record("standalone:" + geo.str(), week, week.prev(), week);
    }
    return standalone_estimate(estimate_standalone_model(z, w), w_now, p_prev);
}

} // namespace argox
