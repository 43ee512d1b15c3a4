#pragma once

// Joint second step for the pooled geographies: a structured-covariance best
// linear predictor of the %ILI increment from four predictor blocks (last
// increment, state, regional and national first-step estimates).

#include "argox/audit.hpp"
#include "argox/blp.hpp"
#include "argox/error.hpp"
#include "argox/first_step.hpp"
#include "argox/geo_registry.hpp"
#include "argox/ingestion.hpp"
#include "argox/panel.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace argox {

/// Number of predictor blocks in the joint stack.
inline constexpr int kJointBlocks = 4;

/// Increments Z_t = p_t - p_{t-1}; row i corresponds to weeks[i].
struct IncrementTargets {
    std::vector<EpiWeek> weeks;
    Eigen::MatrixXd z;
};

inline IncrementTargets build_increment_targets(const WeeklyPanel& ili, const std::vector<GeoId>& geos)
{
    if (!ili.contiguous()) {
        throw DataError("increment targets need a gap-free week index");
    }
    IncrementTargets out;
    if (ili.rows() < 2) {
        out.z.resize(0, static_cast<Eigen::Index>(geos.size()));
        return out;
    }
    Eigen::MatrixXd levels(ili.rows(), static_cast<Eigen::Index>(geos.size()));
    for (std::size_t g = 0; g < geos.size(); ++g) {
        levels.col(static_cast<Eigen::Index>(g)) = ili.column(geos[g].str());
    }
    // Skip leading weeks where some geography has not started reporting.
    Eigen::Index start = 0;
    while (start < levels.rows() && !levels.row(start).allFinite()) {
        ++start;
    }
    const Eigen::Index n = std::max<Eigen::Index>(0, levels.rows() - start - 1);
    if (n > 0) {
        out.weeks.assign(ili.index().begin() + start + 1, ili.index().begin() + start + 1 + n);
    }
    out.z = levels.bottomRows(n) - levels.middleRows(start, n);
    return out;
}

/// W_t = (Z_{t-1}, p_hat_GT - p_{t-1}, p_hat_reg[r_m] - p_{t-1}, p_hat_nat - p_{t-1}).
inline Eigen::VectorXd build_predictor_stack(EpiWeek week, const WeeklyPanel& ili, const FirstStepPanel& first_step,
                                             const GeoRegistry& registry, const std::vector<GeoId>& geos)
{
    const auto g = static_cast<Eigen::Index>(geos.size());
    const auto prev = ili.row_of(week.prev());
    const auto prev2 = ili.row_of(week - 2);
    if (!prev || !prev2) {
        throw DataError("predictor stack at " + week.str() + " needs %ILI for the two previous weeks");
    }
    const auto& fs = first_step.at(week);
    Eigen::VectorXd w(kJointBlocks * g);
    for (Eigen::Index i = 0; i < g; ++i) {
        const auto& geo = geos[static_cast<std::size_t>(i)];
        const auto col = ili.require_column(geo.str());
        const double p1 = ili.values()(*prev, col);
        const double p2 = ili.values()(*prev2, col);
        w(i) = p1 - p2;
        w(g + i) = first_step.state(week, geo) - p1;
        w(2 * g + i) = first_step.region(week, registry.region_of(geo)) - p1;
        w(3 * g + i) = fs.national - p1;
    }
    return w;
}

/// Training-window sample moments feeding the structured covariance.
struct ComponentMoments {
    Eigen::VectorXd mu_z;
    Eigen::VectorXd mu_w;
    Eigen::MatrixXd sigma_zz;
    Eigen::MatrixXd sigma_gt;  ///< Var(p_hat_GT - p)
    Eigen::MatrixXd sigma_reg; ///< Var(p_hat_reg - p)
    Eigen::MatrixXd sigma_nat; ///< Var(p_hat_nat - p)
    Eigen::VectorXd d_ww;      ///< diagonal of the empirical covariance of W
    Eigen::MatrixXd empirical_correlation; ///< of the stacked (Z, W)

    Eigen::Index geos() const { return mu_z.size(); }
};

/// Moments from a window of rows (one per week) of Z (n x G) and W (n x 4G).
/// The first-step errors are recovered as W_k - Z for the three estimate
/// blocks and are centred on their own window means.
inline ComponentMoments estimate_components(const Eigen::MatrixXd& z, const Eigen::MatrixXd& w)
{
    const auto n = z.rows();
    const auto g = z.cols();
    if (w.rows() != n || w.cols() != kJointBlocks * g) {
        throw DataError("estimate_components: Z and W windows have inconsistent shapes");
    }
    if (n < 2) {
        throw DataError("estimate_components: training window too short (" + std::to_string(n) + " rows)");
    }
    Eigen::MatrixXd joint(n, z.cols() + w.cols());
    joint << z, w;
    if (((joint.rowwise() - joint.row(0)).array() == 0.0).all()) {
        throw DataError("estimate_components: degenerate window (all observations identical)");
    }
    ComponentMoments m;
    m.mu_z = sample_mean(z);
    m.mu_w = sample_mean(w);
    m.sigma_zz = sample_covariance(z);
    m.sigma_gt = sample_covariance(w.middleCols(g, g) - z);
    m.sigma_reg = sample_covariance(w.middleCols(2 * g, g) - z);
    m.sigma_nat = sample_covariance(w.middleCols(3 * g, g) - z);
    m.d_ww = sample_covariance(w).diagonal();
    m.empirical_correlation = covariance_to_correlation(sample_covariance(joint));
    return m;
}

struct StructuredCovariance {
    Eigen::MatrixXd sigma_zw; ///< G x 4G
    Eigen::MatrixXd sigma_ww; ///< 4G x 4G
};

/// Sigma_ZW = [rho S | S | S | S] and
///
///     Sigma_WW = | S      rho S     rho S      rho S     |
///                | rho S  S + S_GT  S          S         |
///                | rho S  S         S + S_reg  S         |
///                | rho S  S         S          S + S_nat |
///
/// with S = Sigma_ZZ.
inline StructuredCovariance assemble_structured_cov(const Eigen::MatrixXd& sigma_zz, const Eigen::MatrixXd& sigma_gt,
                                                    const Eigen::MatrixXd& sigma_reg,
                                                    const Eigen::MatrixXd& sigma_nat, double rho)
{
    const auto g = sigma_zz.rows();
    for (const auto* m : {&sigma_zz, &sigma_gt, &sigma_reg, &sigma_nat}) {
        if (m->rows() != g || m->cols() != g) {
            throw DataError("assemble_structured_cov: component blocks must all be " + std::to_string(g) + "x" +
                            std::to_string(g));
        }
    }
    StructuredCovariance out;
    out.sigma_zw.resize(g, kJointBlocks * g);
    out.sigma_zw << rho * sigma_zz, sigma_zz, sigma_zz, sigma_zz;

    out.sigma_ww.resize(kJointBlocks * g, kJointBlocks * g);
    const Eigen::MatrixXd* extra[kJointBlocks] = {nullptr, &sigma_gt, &sigma_reg, &sigma_nat};
    for (int r = 0; r < kJointBlocks; ++r) {
        for (int c = 0; c < kJointBlocks; ++c) {
            auto block = out.sigma_ww.block(r * g, c * g, g, g);
            if (r == c) {
                block = sigma_zz;
                if (extra[r]) {
                    block += *extra[r];
                }
            } else if (r == 0 || c == 0) {
                block = rho * sigma_zz;
            } else {
                block = sigma_zz;
            }
        }
    }
    return out;
}

inline StructuredCovariance assemble_structured_cov(const ComponentMoments& m, double rho)
{
    return assemble_structured_cov(m.sigma_zz, m.sigma_gt, m.sigma_reg, m.sigma_nat, rho);
}

/// Full structured covariance of the stacked (Z, W).
inline Eigen::MatrixXd structured_joint_covariance(const ComponentMoments& m, double rho)
{
    const auto s = assemble_structured_cov(m, rho);
    const auto g = m.geos();
    Eigen::MatrixXd joint(g + s.sigma_ww.rows(), g + s.sigma_ww.cols());
    joint << m.sigma_zz, s.sigma_zw, s.sigma_zw.transpose(), s.sigma_ww;
    return joint;
}

inline constexpr double kRhoClip = 1e-6;

/// Squared Frobenius distance between the empirical joint correlation and
/// the correlation implied by the structured covariance at `rho`.
inline double rho_objective(const ComponentMoments& m, double rho)
{
    return (covariance_to_correlation(structured_joint_covariance(m, rho)) - m.empirical_correlation).squaredNorm();
}

/// rho in [1e-6, 1 - 1e-6] minimising rho_objective. The structured matrix is
/// affine in rho and its diagonal does not depend on rho, so the two
/// correlation pieces are precomputed and the objective is evaluated cheaply.
inline double estimate_rho(const ComponentMoments& m)
{
    const Eigen::MatrixXd at0 = structured_joint_covariance(m, 0.0);
    const Eigen::MatrixXd at1 = structured_joint_covariance(m, 1.0);
    const Eigen::MatrixXd c0 = covariance_to_correlation(at0);
    const Eigen::MatrixXd slope = covariance_to_correlation(at1) - c0;
    const Eigen::MatrixXd offset = c0 - m.empirical_correlation;
    auto objective = [&](double rho) { return (offset + rho * slope).squaredNorm(); };
    return minimize_on_interval(objective, kRhoClip, 1.0 - kRhoClip);
}

/// Fitted joint model for one estimation week.
struct SecondStepModel {
    ComponentMoments moments;
    double rho = 0.0;
    StructuredCovariance structured;
    ShrunkPredictor predictor;
};

inline SecondStepModel build_second_step_model(ComponentMoments moments, std::optional<double> rho = std::nullopt)
{
    SecondStepModel model;
    model.rho = rho ? *rho : estimate_rho(moments);
    model.structured = assemble_structured_cov(moments, model.rho);
    model.predictor = ShrunkPredictor(moments.mu_z, moments.mu_w, moments.sigma_zz, model.structured.sigma_zw,
                                      model.structured.sigma_ww, moments.d_ww);
    model.moments = std::move(moments);
    return model;
}

/// p_hat_T = p_{T-1} + mu_Z + K (W_T - mu_W), clamped to [floor, 100 - floor].
inline Eigen::VectorXd blp_estimate(const SecondStepModel& model, const Eigen::VectorXd& w,
                                    const Eigen::VectorXd& p_prev)
{
    if (p_prev.size() != model.moments.geos()) {
        throw DataError("blp_estimate: previous-week vector has wrong length");
    }
    Eigen::VectorXd p = p_prev + model.predictor.increment(w);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p(i) = clamp_percent(p(i));
    }
    return p;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// point +/- 1.96 sqrt(diag(conditional variance)); the lower bound is
/// floored at 0 %ILI.
inline std::vector<Interval> interval_estimate(const SecondStepModel& model, const Eigen::VectorXd& point)
{
    const Eigen::VectorXd hw = model.predictor.half_width();
    if (point.size() != hw.size()) {
        throw DataError("interval_estimate: point vector has wrong length");
    }
    std::vector<Interval> out(static_cast<std::size_t>(point.size()));
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        out[static_cast<std::size_t>(i)] = {std::max(0.0, point(i) - hw(i)), point(i) + hw(i)};
    }
    return out;
}

/// Per-week diagnostics for the audit log.
struct ModelDiagnostics {
    double rho = 0.0;
    double condition = 0.0; ///< estimated condition number of the system matrix
    double jitter = 0.0;
};

struct JointWeekResult {
    Eigen::VectorXd point;
    std::vector<Interval> intervals;
    ModelDiagnostics diagnostics;
};

/// Joint second step for `week`: moments from the `window` weeks before it,
/// then the shrunk predictor applied to W_week.
inline JointWeekResult joint_second_step(EpiWeek week, int window, const WeeklyPanel& ili,
                                         const FirstStepPanel& first_step, const GeoRegistry& registry,
                                         const std::vector<GeoId>& geos, LookaheadAudit* audit = nullptr)
{
    const auto g = static_cast<Eigen::Index>(geos.size());
    Eigen::MatrixXd z(window, g);
    Eigen::MatrixXd w(window, kJointBlocks * g);
    for (int i = 0; i < window; ++i) {
        const EpiWeek t = week - (window - i);
        const auto row = ili.row_of(t);
        const auto prev = ili.row_of(t.prev());
        if (!row || !prev) {
            throw DataError("joint second step at " + week.str() + ": no %ILI at " + t.str());
        }
        for (Eigen::Index k = 0; k < g; ++k) {
            const auto col = ili.require_column(geos[static_cast<std::size_t>(k)].str());
            z(i, k) = ili.values()(*row, col) - ili.values()(*prev, col);
        }
        w.row(i) = build_predictor_stack(t, ili, first_step, registry, geos).transpose();
    }
    Eigen::VectorXd p_prev(g);
    const auto prev = ili.require_row(week.prev());
    for (Eigen::Index k = 0; k < g; ++k) {
        p_prev(k) = ili.values()(prev, ili.require_column(geos[static_cast<std::size_t>(k)].str()));
    }
    const Eigen::VectorXd w_now = build_predictor_stack(week, ili, first_step, registry, geos);
    if (!z.allFinite() || !w.allFinite() || !p_prev.allFinite() || !w_now.allFinite()) {
        throw DataError("joint second step at " + week.str() + ": missing %ILI or first-step value in the window");
    }
    if (audit) {
        // Latest %ILI read is p_{T-1}; the latest first-step estimate is for T.
        audit->record("joint", week, week.prev(), week);
    }

    const auto model = build_second_step_model(estimate_components(z, w));
    JointWeekResult out;
    out.point = blp_estimate(model, w_now, p_prev);
    out.intervals = interval_estimate(model, out.point);
    out.diagnostics = {model.rho, 1.0 / model.predictor.rcond(), model.predictor.jitter()};
    return out;
}

} // namespace argox
