/**
 * @file mean.hpp
 * @brief Nadaraya-Watson weights, conditional mean, kernel density, jackknife correction.
 *
 * With K_b(v) = b^{-k} K(v / b) and standardized covariates X_t,
 *
 *     nu_t(x)   = K_b(x - X_t) / sum_s K_b(x - X_s)
 *     mu_hat(x) = sum_t nu_t(x) Y_t
 *     f_hat(x)  = (n b^k)^{-1} sum_t K((x - X_t) / b)
 *     mu_star   = 2 mu_hat_b(x) - mu_hat_{sqrt(2) b}(x)
 *
 * Evaluation points x are on the standardized covariate scale.
 */
#pragma once

#include "npmv/dataset.hpp"
#include "npmv/error.hpp"
#include "npmv/kernels.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace npmv {

/// Observations with a positive scaled-kernel weight K_b(x - X_t) at one evaluation point.
struct LocalWeights {
    std::vector<Eigen::Index> index;
    std::vector<double> kernel;  // K_b(x - X_t), same order as index
    double total = 0.0;
    Eigen::Index n = 0;          // size of the full sample
};

namespace detail {

inline void check_point(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const KernelSpec& spec) {
    if (spec.dim() != data.k()) {
        throw std::invalid_argument("kernel dimension " + std::to_string(spec.dim()) +
                                    " does not match covariate dimension " + std::to_string(data.k()));
    }
    if (x.size() != data.k()) {
        throw std::invalid_argument("evaluation point has dimension " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(data.k()));
    }
}

inline std::string describe_point(const Eigen::Ref<const Eigen::VectorXd>& x) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
    os << ')';
    return os.str();
}

}  // namespace detail

/// Sparse kernel weights at x; throws EmptyNeighborhoodError when none is positive.
inline LocalWeights local_weights(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const KernelSpec& spec, const Bandwidth& b) {
    detail::check_point(data, x, spec);
    const Eigen::MatrixXd& z = data.standardized();
    const double h = b.value();
    const double inv_h2 = 1.0 / (h * h);
    const double scale = std::pow(h, -spec.dim());

    LocalWeights w;
    w.n = data.n();
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
        double r2 = 0.0;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double d = x(j) - z(t, j);
            r2 += d * d;
        }
        const double kv = spec.profile(r2 * inv_h2);
        if (kv > 0.0) {
            w.index.push_back(t);
            w.kernel.push_back(scale * kv);
            w.total += scale * kv;
        }
    }
    if (!(w.total > 0.0)) {
        throw EmptyNeighborhoodError("no observation has positive kernel weight at x = " +
                                     detail::describe_point(x) + " with bandwidth " +
                                     std::to_string(h));
    }
    return w;
}

/// Dense normalized weights nu_t(x), t = 1..n.
inline Eigen::VectorXd nw_weights(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const KernelSpec& spec, const Bandwidth& b) {
    const LocalWeights lw = local_weights(data, x, spec, b);
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(data.n());
    for (std::size_t i = 0; i < lw.index.size(); ++i) nu(lw.index[i]) = lw.kernel[i] / lw.total;
    return nu;
}

struct MeanEstimate {
    Eigen::VectorXd point;   // mu_hat(x)
    double density = 0.0;    // f_hat(x)
    double effective_mass = 0.0;  // sum_t K_b(x - X_t)
    Bandwidth bandwidth{1.0};
};

/// Weighted response average over the local support.
inline Eigen::VectorXd weighted_response_mean(const Dataset& data, const LocalWeights& lw) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(data.p());
    const Eigen::MatrixXd& y = data.responses();
    for (std::size_t i = 0; i < lw.index.size(); ++i) {
        acc += lw.kernel[i] * y.row(lw.index[i]).transpose();
    }
    return acc / lw.total;
}

inline MeanEstimate estimate_mean(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const KernelSpec& spec, const Bandwidth& b) {
    const LocalWeights lw = local_weights(data, x, spec, b);
    MeanEstimate est;
    est.point = weighted_response_mean(data, lw);
    est.effective_mass = lw.total;
    est.density = lw.total / static_cast<double>(data.n());
    est.bandwidth = b;
    return est;
}

/// Bias-corrected mean 2 mu_hat_b(x) - mu_hat_{sqrt(2) b}(x).
inline Eigen::VectorXd jackknife_mean(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                      const KernelSpec& spec, const Bandwidth& b) {
    const Eigen::VectorXd narrow = estimate_mean(data, x, spec, b).point;
    const Eigen::VectorXd wide =
        estimate_mean(data, x, spec, Bandwidth(b.value() * std::numbers::sqrt2)).point;
    return 2.0 * narrow - wide;
}

}  // namespace npmv
