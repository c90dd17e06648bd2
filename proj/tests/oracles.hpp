// Independent reference computations for the tests. Nothing here calls the
// library's numerical routines; formulas are written out from their definitions.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

/// Epanechnikov kernel from its textbook formula.
inline double epanechnikov(const Eigen::VectorXd& u) {
    const double k = static_cast<double>(u.size());
    const double ball = std::pow(std::numbers::pi, k / 2.0) / std::tgamma(k / 2.0 + 1.0);
    const double r2 = u.squaredNorm();
    return r2 <= 1.0 ? (k + 2.0) / (2.0 * ball) * (1.0 - r2) : 0.0;
}

/// Midpoint rule over the cube [-half_width, half_width]^k with m cells per axis.
inline double cube_integral(const std::function<double(const Eigen::VectorXd&)>& f, int k, double half_width,
                            int m) {
    const double h = 2.0 * half_width / m;
    std::vector<int> idx(k, 0);
    Eigen::VectorXd t(k);
    double acc = 0.0;
    while (true) {
        for (int j = 0; j < k; ++j) t(j) = -half_width + (idx[j] + 0.5) * h;
        acc += f(t);
        int j = 0;
        while (j < k && ++idx[j] == m) idx[j++] = 0;
        if (j == k) break;
    }
    return acc * std::pow(h, k);
}

/// Nadaraya-Watson weights by a direct loop (covariates already on the kernel scale).
inline Eigen::VectorXd nw_weights(const Eigen::MatrixXd& z, const Eigen::VectorXd& x, double b) {
    Eigen::VectorXd w(z.rows());
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
        w(t) = epanechnikov((x - z.row(t).transpose()) / b) / std::pow(b, z.cols());
    }
    return w / w.sum();
}

inline Eigen::VectorXd nw_mean(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, const Eigen::VectorXd& x,
                               double b) {
    const Eigen::VectorXd w = nw_weights(z, x, b);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(y.cols());
    for (Eigen::Index t = 0; t < z.rows(); ++t) m += w(t) * y.row(t).transpose();
    return m;
}

/// Sigma_hat(x) from the defining double loop.
inline Eigen::MatrixXd nw_cov(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, const Eigen::VectorXd& x,
                              double b_cov, double b_mean) {
    const Eigen::VectorXd w = nw_weights(z, x, b_cov);
    const Eigen::Index p = y.cols();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
        if (w(t) == 0.0) continue;
        const Eigen::VectorXd r = y.row(t).transpose() - nw_mean(z, y, z.row(t).transpose(), b_mean);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) s(i, j) += w(t) * r(i) * r(j);
        }
    }
    return s;
}

/// sum_t w_t (|Y_t - q| + <u, Y_t - q>).
inline double geo_objective(const Eigen::MatrixXd& y, const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& q) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
        double norm2 = 0.0;
        double inner = 0.0;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double d = y(t, j) - q(j);
            norm2 += d * d;
            inner += u(j) * d;
        }
        acc += w(t) * (std::sqrt(norm2) + inner);
    }
    return acc;
}

/**
 * Brute-force minimizer of a function on [lo, hi] (p <= 2) by nested grids:
 * scan a 41-point-per-axis grid, then shrink the box around the best node and
 * rescan until the cell size drops below `resolution`.
 */
inline Eigen::VectorXd nested_grid_min(const std::function<double(const Eigen::VectorXd&)>& f,
                                       Eigen::VectorXd lo, Eigen::VectorXd hi, double resolution = 1e-6) {
    const int m = 41;
    const Eigen::Index p = lo.size();
    Eigen::VectorXd best = 0.5 * (lo + hi);
    while (true) {
        const Eigen::VectorXd step = (hi - lo) / (m - 1);
        double best_val = f(best);
        Eigen::VectorXd q(p);
        const int total = p == 1 ? m : m * m;
        for (int i = 0; i < total; ++i) {
            q(0) = lo(0) + (i % m) * step(0);
            if (p == 2) q(1) = lo(1) + (i / m) * step(1);
            const double v = f(q);
            if (v < best_val) {
                best_val = v;
                best = q;
            }
        }
        if (step.maxCoeff() < resolution) return best;
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
}

/// Standard normal quantile by bisection on the CDF written with erfc.
inline double normal_quantile(double prob) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double cdf = 0.5 * std::erfc(-mid / std::numbers::sqrt2);
        (cdf < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracle
