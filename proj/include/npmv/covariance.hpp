/**
 * @file covariance.hpp
 * @brief Kernel-weighted conditional covariance and generalized variance.
 *
 *     Sigma_hat(x) = sum_t nu_t(x) (Y_t - mu_hat(X_t)) (Y_t - mu_hat(X_t))'
 *
 * The outer weights nu_t(x) use b_cov; the in-sample fits mu_hat(X_t) use
 * b_mean and include observation t itself (plain plug-in). The fits do not
 * depend on x, so they can be computed once with fitted_means() and shared
 * across evaluation points.
 */
#pragma once

#include "npmv/mean.hpp"

#include <Eigen/Dense>

#include <optional>

namespace npmv {

struct CovEstimate {
    Eigen::MatrixXd matrix;
    double generalized_variance = 0.0;
    Bandwidth bandwidth{1.0};
};

/// Determinant, clamped to 0 when it lies in [-1e-10, 0).
inline double generalized_variance(const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
    if (matrix.rows() != matrix.cols()) throw std::invalid_argument("generalized_variance: matrix not square");
    const double det = matrix.determinant();
    return (det < 0.0 && det >= -1e-10) ? 0.0 : det;
}

inline double generalized_variance(const CovEstimate& cov) { return generalized_variance(cov.matrix); }

/// In-sample fits mu_hat(X_t) for every row t, as an n x p matrix.
inline Eigen::MatrixXd fitted_means(const Dataset& data, const KernelSpec& spec, const Bandwidth& b_mean) {
    Eigen::MatrixXd fits(data.n(), data.p());
    for (Eigen::Index t = 0; t < data.n(); ++t) {
        try {
            fits.row(t) = estimate_mean(data, data.standardized().row(t).transpose(), spec, b_mean)
                              .point.transpose();
        } catch (const EmptyNeighborhoodError& e) {
            throw ResidualEvaluationError("in-sample mean fit failed at row " + std::to_string(t) + ": " +
                                          e.what());
        }
    }
    return fits;
}

namespace detail {

inline void check_psd(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double lowest = eig.eigenvalues().minCoeff();
    if (lowest < -1e-10) {
        throw DiagnosticsError("conditional covariance has eigenvalue " + std::to_string(lowest) +
                               " < -1e-10");
    }
}

}  // namespace detail

/// Covariance at x from precomputed in-sample fits (n x p).
inline CovEstimate estimate_cov(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                const KernelSpec& spec, const Bandwidth& b_cov,
                                const Eigen::Ref<const Eigen::MatrixXd>& fits) {
    if (fits.rows() != data.n() || fits.cols() != data.p()) {
        throw std::invalid_argument("estimate_cov: fitted means have the wrong shape");
    }
    const LocalWeights lw = local_weights(data, x, spec, b_cov);
    const Eigen::Index p = data.p();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd r(p);
    for (std::size_t i = 0; i < lw.index.size(); ++i) {
        const Eigen::Index t = lw.index[i];
        r = (data.responses().row(t) - fits.row(t)).transpose();
        acc.noalias() += (lw.kernel[i] / lw.total) * (r * r.transpose());
    }
    // exact symmetry; the outer products are symmetric up to rounding already
    acc = 0.5 * (acc + acc.transpose()).eval();
    detail::check_psd(acc);

    CovEstimate est;
    est.matrix = std::move(acc);
    est.generalized_variance = generalized_variance(est.matrix);
    est.bandwidth = b_cov;
    return est;
}

/// Covariance at x; in-sample fits are computed only for rows inside the b_cov support.
inline CovEstimate estimate_cov(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                const KernelSpec& spec, const Bandwidth& b_cov, const Bandwidth& b_mean) {
    const LocalWeights lw = local_weights(data, x, spec, b_cov);
    Eigen::MatrixXd fits = Eigen::MatrixXd::Zero(data.n(), data.p());
    for (const Eigen::Index t : lw.index) {
        try {
            fits.row(t) =
                estimate_mean(data, data.standardized().row(t).transpose(), spec, b_mean).point.transpose();
        } catch (const EmptyNeighborhoodError& e) {
            throw ResidualEvaluationError("in-sample mean fit failed at row " + std::to_string(t) + ": " +
                                          e.what());
        }
    }
    return estimate_cov(data, x, spec, b_cov, fits);
}

}  // namespace npmv
