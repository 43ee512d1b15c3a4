#pragma once

// L1-penalised least squares by cyclic coordinate descent.
//
// Objective, on internally standardised features (mean 0, (1/n) sum x^2 = 1):
//
//     (1/(2n)) ||y - b0 - X b||^2 + lambda ||b||_1
//
// The intercept is unpenalised. An unnormalised sum-of-squares penalty
// lambda' corresponds to lambda = lambda' / n here. Coefficients are
// reported on the caller's (unstandardised) feature scale.

#include "argox/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace argox {

struct DesignMatrix {
    Eigen::MatrixXd x; ///< rows = training weeks, cols = features
    Eigen::VectorXd y;

    void validate() const
    {
        if (x.rows() != y.size()) {
            throw DataError("design rows (" + std::to_string(x.rows()) + ") and response length (" +
                            std::to_string(y.size()) + ") differ");
        }
        if (x.rows() < 2) {
            throw DataError("design needs at least 2 rows");
        }
        if (!x.allFinite() || !y.allFinite()) {
            throw DataError("non-finite entry in design or response");
        }
    }
};

struct LassoFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients; ///< original feature scale
    double lambda = 0.0;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale; ///< 0 for dropped constant features
    int sweeps = 0;
    bool converged = true; ///< false when the sweep budget ran out
};

struct LassoOptions {
    double tolerance = 1e-7; ///< max standardised coefficient change per sweep
    int max_sweeps = 10000;
    bool check_descent = false; ///< verify the objective never increases between sweeps
};

inline double soft_threshold(double z, double gamma)
{
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

namespace detail {

inline constexpr double kKktTolerance = 1e-7;

/// Centred/scaled copy of a design restricted to its non-constant columns,
/// with the Gram matrix and feature-response correlations precomputed.
class StandardizedProblem {
public:
    StandardizedProblem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
        : n_(static_cast<double>(x.rows())), p_(x.cols())
    {
        mean_ = x.colwise().mean().transpose();
        y_mean_ = y.mean();
        scale_ = Eigen::VectorXd::Zero(p_);
        for (Eigen::Index j = 0; j < p_; ++j) {
            const double ss = (x.col(j).array() - mean_(j)).square().sum() / n_;
            // Treat columns whose spread is at rounding level as constant.
            const double ref = std::max(1.0, std::abs(mean_(j)));
            if (ss > 1e-24 * ref * ref) {
                scale_(j) = std::sqrt(ss);
                active_.push_back(j);
            }
        }
        const auto q = static_cast<Eigen::Index>(active_.size());
        Eigen::MatrixXd xs(x.rows(), q);
        for (Eigen::Index k = 0; k < q; ++k) {
            const auto j = active_[static_cast<std::size_t>(k)];
            xs.col(k) = (x.col(j).array() - mean_(j)) / scale_(j);
        }
        const Eigen::VectorXd yc = y.array() - y_mean_;
        gram_ = (xs.transpose() * xs) / n_;
        xty_ = (xs.transpose() * yc) / n_;
        yy_ = yc.squaredNorm() / n_;
    }

    Eigen::Index active_count() const { return static_cast<Eigen::Index>(active_.size()); }

    double lambda_max() const { return active_.empty() ? 0.0 : xty_.cwiseAbs().maxCoeff(); }

    double objective(const Eigen::VectorXd& beta, double lambda) const
    {
        return 0.5 * yy_ - beta.dot(xty_) + 0.5 * beta.dot(gram_ * beta) + lambda * beta.lpNorm<1>();
    }

    /// Largest violation of the lasso optimality conditions at `beta`.
    double kkt_residual(const Eigen::VectorXd& beta, double lambda) const
    {
        const Eigen::VectorXd c = xty_ - gram_ * beta;
        double worst = 0.0;
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            const double v = beta(j) == 0.0 ? std::max(0.0, std::abs(c(j)) - lambda)
                                            : std::abs(c(j) - (beta(j) > 0 ? lambda : -lambda));
            worst = std::max(worst, v);
        }
        return worst;
    }

    /// Coordinate descent from the warm start in `beta` (standardised scale).
    /// Returns the number of sweeps; `*converged` is false when the sweep
    /// budget ran out first.
    int solve(double lambda, Eigen::VectorXd& beta, const LassoOptions& opt, bool* converged = nullptr) const
    {
        if (converged) {
            *converged = true;
        }
        const auto q = active_count();
        if (beta.size() != q) {
            beta = Eigen::VectorXd::Zero(q);
        }
        if (q == 0) {
            return 0;
        }
        Eigen::VectorXd c = xty_ - gram_ * beta; // (1/n) X^T residual
        double previous = opt.check_descent ? objective(beta, lambda) : 0.0;
        int sweeps = 0;

        bool support_changed = false; // set by a sweep that moves a coefficient on or off zero or flips it
        auto sweep = [&](bool active_only) {
            double max_delta = 0.0;
            support_changed = false;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (active_only && beta(j) == 0.0) {
                    continue;
                }
                const double g = gram_(j, j);
                const double updated = soft_threshold(c(j) + g * beta(j), lambda) / g;
                const double delta = updated - beta(j);
                if (delta != 0.0) {
                    c.noalias() -= gram_.col(j) * delta;
                    support_changed = support_changed || !(updated * beta(j) > 0.0);
                    beta(j) = updated;
                    max_delta = std::max(max_delta, std::abs(delta));
                }
            }
            ++sweeps;
            if (opt.check_descent) {
                const double now = objective(beta, lambda);
                if (now > previous + 1e-12 * std::max(1.0, std::abs(previous))) {
                    throw NumericalError("lasso objective increased at sweep " + std::to_string(sweeps));
                }
                previous = now;
            }
            return max_delta;
        };

        // Jumps to the minimiser b of the objective restricted to the current
        // signed support (an orthant face, where it is a convex quadratic) when
        // every sign of b agrees. The objective then cannot increase; a guard
        // reverts the step if rounding says otherwise. Coordinate sweeps still
        // decide convergence.
        auto current_objective = [&]() {
            // c = xty - G beta, so beta' G beta = beta' (xty - c).
            return 0.5 * yy_ - 0.5 * beta.dot(xty_ + c) + lambda * beta.lpNorm<1>();
        };
        std::vector<Eigen::Index> support;
        auto support_step = [&]() {
            support.clear();
            for (Eigen::Index j = 0; j < q; ++j) {
                if (beta(j) != 0.0) {
                    support.push_back(j);
                }
            }
            const auto m = static_cast<Eigen::Index>(support.size());
            if (m == 0) {
                return;
            }
            const Eigen::VectorXd old = beta(support);
            Eigen::VectorXd rhs(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                rhs(a) = xty_(support[static_cast<std::size_t>(a)]) - (old(a) > 0.0 ? lambda : -lambda);
            }
            const Eigen::LLT<Eigen::MatrixXd> llt(gram_(support, support));
            if (llt.info() != Eigen::Success) {
                return;
            }
            const auto d = llt.matrixLLT().diagonal();
            if (d.minCoeff() <= 1e-8 * d.maxCoeff()) {
                return; // too close to singular for the solve to be trusted
            }
            const Eigen::VectorXd next = llt.solve(rhs);
            if (!next.allFinite() || ((next.array() * old.array()) <= 0.0).any()) {
                return;
            }
            const double before = current_objective();
            const Eigen::VectorXd delta = next - old;
            c.noalias() -= gram_(Eigen::all, support) * delta;
            beta(support) = next;
            if (current_objective() > before) {
                c.noalias() += gram_(Eigen::all, support) * delta;
                beta(support) = old;
                return;
            }
            if (opt.check_descent) {
                previous = objective(beta, lambda);
            }
        };

        while (sweeps < opt.max_sweeps) {
            // Full pass to settle the active set, then iterate on it alone,
            // jumping to the face minimiser once the signed support is stable.
            if (sweep(false) < opt.tolerance && kkt_residual(beta, lambda) < kKktTolerance) {
                return sweeps;
            }
            bool tried = false;
            while (sweeps < opt.max_sweeps) {
                if (sweep(true) < opt.tolerance) {
                    break;
                }
                if (support_changed) {
                    tried = false;
                } else if (!tried) {
                    support_step();
                    tried = true;
                }
            }
        }
        if (converged) {
            *converged = false;
        }
        return sweeps;
    }

    /// Maps standardised coefficients back to the original feature scale.
    LassoFit to_fit(const Eigen::VectorXd& beta, double lambda, int sweeps, bool converged = true) const
    {
        LassoFit fit;
        fit.lambda = lambda;
        fit.sweeps = sweeps;
        fit.converged = converged;
        fit.feature_mean = mean_;
        fit.feature_scale = scale_;
        fit.coefficients = Eigen::VectorXd::Zero(p_);
        for (std::size_t k = 0; k < active_.size(); ++k) {
            const auto j = active_[k];
            fit.coefficients(j) = beta(static_cast<Eigen::Index>(k)) / scale_(j);
        }
        fit.intercept = y_mean_ - fit.coefficients.dot(mean_);
        return fit;
    }

private:
    double n_;
    Eigen::Index p_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
    double y_mean_ = 0.0;
    std::vector<Eigen::Index> active_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd xty_;
    double yy_ = 0.0;
};

} // namespace detail

/// Smallest penalty at which every coefficient is zero.
inline double lambda_max(const DesignMatrix& design)
{
    design.validate();
    return detail::StandardizedProblem(design.x, design.y).lambda_max();
}

/// Optimality-condition residual of `fit` on the standardised scale.
inline double kkt_residual(const DesignMatrix& design, const LassoFit& fit)
{
    const detail::StandardizedProblem prob(design.x, design.y);
    Eigen::VectorXd beta(prob.active_count());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
        if (fit.feature_scale(j) > 0.0) {
            beta(k++) = fit.coefficients(j) * fit.feature_scale(j);
        }
    }
    return prob.kkt_residual(beta, fit.lambda);
}

/// `count` log-spaced penalties from `lmax` down to `ratio * lmax`.
inline std::vector<double> lambda_path(double lmax, int count = 50, double ratio = 1e-3)
{
    std::vector<double> path(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
        path[static_cast<std::size_t>(k)] = lmax * std::pow(ratio, t);
    }
    return path;
}

inline LassoFit fit_lasso(const DesignMatrix& design, double lambda, const LassoOptions& options = {})
{
    design.validate();
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DataError("lasso penalty must be a finite non-negative number");
    }
    const detail::StandardizedProblem prob(design.x, design.y);
    if (prob.active_count() == 0) {
        throw DataError("lasso design has no non-constant feature");
    }
    // Warm starts down the penalty path reach small penalties in far fewer
    // sweeps than a cold start.
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = true;
    for (double l : lambda_path(prob.lambda_max())) {
        if (l <= lambda) {
            break;
        }
        sweeps += prob.solve(l, beta, options);
    }
    sweeps += prob.solve(lambda, beta, options, &converged);
    return prob.to_fit(beta, lambda, sweeps, converged);
}

inline double predict(const LassoFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != fit.coefficients.size()) {
        throw DataError("predict: feature vector has " + std::to_string(x.size()) + " entries, fit expects " +
                        std::to_string(fit.coefficients.size()));
    }
    return fit.intercept + x.dot(fit.coefficients);
}

struct CrossValidation {
    std::vector<double> path;     ///< decreasing penalties
    std::vector<double> cv_error; ///< mean out-of-fold squared error per penalty
    std::size_t best = 0;
    std::size_t unconverged = 0; ///< fold fits that hit the sweep budget

    double lambda() const { return path[best]; }
};

/// Blocked K-fold cross-validation over the 50-point path. Folds are
/// contiguous runs of rows (time order is kept); the returned index is the
/// first minimiser scanning from the largest penalty.
inline CrossValidation cross_validate(const DesignMatrix& design, int folds = 10, const LassoOptions& options = {})
{
    design.validate();
    const auto n = design.x.rows();
    if (folds < 2 || folds > n) {
        throw DataError("cross-validation needs 2 <= folds <= rows (folds=" + std::to_string(folds) +
                        ", rows=" + std::to_string(n) + ")");
    }
    CrossValidation cv;
    const double lmax = lambda_max(design);
    if (lmax <= 0.0) {
        cv.path = {0.0};
        cv.cv_error = {0.0};
        return cv;
    }
    cv.path = lambda_path(lmax);
    cv.cv_error.assign(cv.path.size(), 0.0);

    for (int k = 0; k < folds; ++k) {
        const Eigen::Index lo = n * k / folds;
        const Eigen::Index hi = n * (k + 1) / folds;
        const Eigen::Index held = hi - lo;
        Eigen::MatrixXd xt(n - held, design.x.cols());
        Eigen::VectorXd yt(n - held);
        xt << design.x.topRows(lo), design.x.bottomRows(n - hi);
        yt << design.y.head(lo), design.y.tail(n - hi);

        const detail::StandardizedProblem prob(xt, yt);
        Eigen::VectorXd beta;
        for (std::size_t i = 0; i < cv.path.size(); ++i) {
            bool converged = true;
            const int sweeps = prob.solve(cv.path[i], beta, options, &converged);
            const auto fit = prob.to_fit(beta, cv.path[i], sweeps, converged);
            cv.unconverged += !converged;
            const Eigen::VectorXd pred =
                (design.x.middleRows(lo, held) * fit.coefficients).array() + fit.intercept;
            cv.cv_error[i] += (pred - design.y.segment(lo, held)).squaredNorm();
        }
    }
    for (auto& e : cv.cv_error) {
        e /= static_cast<double>(n);
    }
    for (std::size_t i = 1; i < cv.cv_error.size(); ++i) {
        if (cv.cv_error[i] < cv.cv_error[cv.best]) {
            cv.best = i;
        }
    }
    return cv;
}

inline double cv_lambda(const DesignMatrix& design, int folds = 10, const LassoOptions& options = {})
{
    return cross_validate(design, folds, options).lambda();
}

} // namespace argox
