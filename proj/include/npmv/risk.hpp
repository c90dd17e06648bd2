#pragma once

#include "npmv/geoquantile.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace npmv {

struct VarEstimate {
    double level = 0.95;
    Eigen::VectorXd value;  // per-asset VaR in loss units
    Eigen::VectorXd x;      // conditioning point (standardized)
    QuantileEstimate fit;
};

/// Conditional VaR: geometric quantile of the losses L_t = -Y_t at direction_from_level(alpha).
inline VarEstimate var_estimate(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                const KernelSpec& spec, const Bandwidth& b, double alpha,
                                const IrlsConfig& cfg = {}) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("VaR level must be in (0, 1)");
    WeightedCloud losses = local_cloud(data, x, spec, b);
    losses.points = -losses.points;
    VarEstimate out;
    out.level = alpha;
    out.x = x;
    out.fit = estimate_quantile(losses, direction_from_level(alpha, data.p()).u, cfg);
    out.value = out.fit.q;
    return out;
}

/// Sample standard deviation (denominator window - 1) of each trailing window.
inline std::vector<double> rolling_volatility(std::span<const double> series, std::size_t window) {
    if (window < 2 || window > series.size()) {
        throw std::invalid_argument("rolling window must satisfy 2 <= window <= series length");
    }
    std::vector<double> out;
    out.reserve(series.size() - window + 1);
    for (std::size_t j = 0; j + window <= series.size(); ++j) {
        const auto w = series.subspan(j, window);
        double mean = 0.0;
        for (const double v : w) mean += v;
        mean /= static_cast<double>(window);
        double ss = 0.0;
        for (const double v : w) ss += (v - mean) * (v - mean);
        out.push_back(std::sqrt(ss / static_cast<double>(window - 1)));
    }
    return out;
}

}  // namespace npmv
