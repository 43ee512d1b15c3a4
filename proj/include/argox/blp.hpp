#pragma once

// Moment estimation and the shrunk best linear predictor shared by the joint
// and stand-alone second steps.

#include "argox/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace argox {

/// Two-sided 95% normal quantile used for interval half-widths.
inline constexpr double kZ95 = 1.96;

/// Column means of an observations x variables matrix.
inline Eigen::VectorXd sample_mean(const Eigen::MatrixXd& obs)
{
    return obs.colwise().mean().transpose();
}

/// Unbiased (n - 1) sample covariance of an observations x variables matrix.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& obs)
{
    if (obs.rows() < 2) {
        throw DataError("sample covariance needs at least 2 observations");
    }
    const Eigen::MatrixXd centred = obs.rowwise() - obs.colwise().mean();
    return (centred.transpose() * centred) / static_cast<double>(obs.rows() - 1);
}

/// Rescales a covariance matrix to unit diagonal. Rows/columns of
/// zero-variance variables are set to zero.
inline Eigen::MatrixXd covariance_to_correlation(const Eigen::MatrixXd& cov)
{
    Eigen::VectorXd inv_sd(cov.rows());
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        inv_sd(i) = cov(i, i) > 0.0 ? 1.0 / std::sqrt(cov(i, i)) : 0.0;
    }
    return inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
}

/// Cholesky factorisation with the jitter fallback: on failure add
/// 1e-8 * mean(diag) to the diagonal and retry, at most three times.
template <class Matrix>
struct JitteredCholesky {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0; ///< total amount added to the diagonal
    int retries = 0;

    template <class Rhs>
    auto solve(const Rhs& b) const
    {
        return llt.solve(b);
    }

    /// Reciprocal condition number estimate of the factorised matrix.
    double rcond() const { return llt.rcond(); }
};

inline constexpr int kMaxJitterRetries = 3;
inline constexpr double kJitterScale = 1e-8;

template <class Matrix>
JitteredCholesky<Matrix> factorize_with_jitter(const Matrix& m)
{
    if (m.rows() != m.cols()) {
        throw NumericalError("factorize_with_jitter: matrix is not square");
    }
    if (!m.allFinite()) {
        throw NumericalError("factorize_with_jitter: non-finite matrix entry");
    }
    JitteredCholesky<Matrix> out;
    const double step = kJitterScale * m.diagonal().mean();
    Matrix work = m;
    for (int attempt = 0;; ++attempt) {
        out.llt.compute(work);
        if (out.llt.info() == Eigen::Success && (out.llt.matrixLLT().diagonal().array() > 0.0).all()) {
            return out;
        }
        if (attempt == kMaxJitterRetries || !(step > 0.0)) {
            throw NumericalError("system matrix is not positive definite after " + std::to_string(attempt) +
                                 " jitter retries");
        }
        work.diagonal().array() += step;
        out.jitter += step;
        out.retries = attempt + 1;
    }
}

/// Best linear predictor of Z from W after replacing the joint covariance
/// of (Z, W) by the average of itself and its diagonal:
///
///     Z_hat = mu_Z + (1/2) S_ZW ((1/2) S_WW + (1/2) D_WW)^-1 (W - mu_W)
///     Var   = S_ZZ - (1/2) S_ZW ((1/2) S_WW + (1/2) D_WW)^-1 (1/2) S_WZ
///
/// Only the diagonal of the conditional variance is kept.
class ShrunkPredictor {
public:
    ShrunkPredictor() = default;

    ShrunkPredictor(Eigen::VectorXd mu_z, Eigen::VectorXd mu_w, const Eigen::MatrixXd& sigma_zz,
                    const Eigen::MatrixXd& sigma_zw, const Eigen::MatrixXd& sigma_ww, const Eigen::VectorXd& d_ww)
        : mu_z_(std::move(mu_z)), mu_w_(std::move(mu_w))
    {
        const auto g = mu_z_.size();
        const auto w = mu_w_.size();
        if (sigma_zz.rows() != g || sigma_zz.cols() != g || sigma_zw.rows() != g || sigma_zw.cols() != w ||
            sigma_ww.rows() != w || sigma_ww.cols() != w || d_ww.size() != w) {
            throw DataError("shrunk predictor: inconsistent block dimensions");
        }
        Eigen::MatrixXd system = 0.5 * sigma_ww;
        system.diagonal() += 0.5 * d_ww;
        const Eigen::MatrixXd half_zw = 0.5 * sigma_zw;
        chol_ = factorize_with_jitter(system);
        gain_ = chol_.solve(half_zw.transpose()).transpose();
        variance_ = sigma_zz.diagonal() - gain_.cwiseProduct(half_zw).rowwise().sum();
    }

    /// Predicted increment mu_Z + K (W - mu_W).
    Eigen::VectorXd increment(const Eigen::VectorXd& w) const
    {
        if (w.size() != mu_w_.size()) {
            throw DataError("predictor stack has wrong length");
        }
        return mu_z_ + gain_ * (w - mu_w_);
    }

    /// K = (1/2) S_ZW ((1/2) S_WW + (1/2) D_WW)^-1
    const Eigen::MatrixXd& gain() const { return gain_; }

    /// Diagonal of the conditional variance (not floored).
    const Eigen::VectorXd& conditional_variance() const { return variance_; }

    /// 1.96 * sqrt(max(variance, 0)).
    Eigen::VectorXd half_width() const { return kZ95 * variance_.cwiseMax(0.0).cwiseSqrt(); }

    double jitter() const { return chol_.jitter; }
    double rcond() const { return chol_.rcond(); }

private:
    Eigen::VectorXd mu_z_;
    Eigen::VectorXd mu_w_;
    JitteredCholesky<Eigen::MatrixXd> chol_;
    Eigen::MatrixXd gain_;
    Eigen::VectorXd variance_;
};

/// Minimises a scalar function on [lo, hi]: evaluate an even grid of
/// `grid` points, then refine around the best one by golden-section search
/// until the bracket is narrower than `tol`.
template <class F>
double minimize_on_interval(F&& f, double lo, double hi, int grid = 64, double tol = 1e-6)
{
    const double step = (hi - lo) / (grid - 1);
    int best = 0;
    double best_value = f(lo);
    for (int i = 1; i < grid; ++i) {
        const double v = f(lo + step * i);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    double a = lo + step * std::max(0, best - 1);
    double b = lo + step * std::min(grid - 1, best + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    // The grid point can beat the refined interior point when the minimum
    // sits on the boundary.
    return f(x) <= best_value ? x : lo + step * best;
}

} // namespace argox
