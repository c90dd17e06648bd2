/**
 * @file confidence_band.hpp
 * @brief Chi-square based confidence bands for linear functionals a' mu(x).
 *
 *     a' mu(x)  in  a' mu_star(x) +/- sqrt( phi_K chi2_{p;1-alpha} a' Sigma_hat(x) a / (n b^k f_hat(x)) )
 *
 * The chi-square quantile makes the band simultaneous over all contrasts a,
 * so basis contrasts give family-wise coverage 1 - alpha for the p marginals.
 * The error variance of the model is taken as the identity.
 *
 * The center mu_star is the jackknife combination, whose variance is that of
 * a local-constant fit with kernel 2K - K_{sqrt 2}. The bands therefore use
 * jackknife_phi(spec) in place of phi_K (about 2.4 phi_K for Epanechnikov,
 * k = 3); band_half_width() itself takes the constant as an argument.
 */
#pragma once

#include "npmv/covariance.hpp"
#include "npmv/mean.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include <cmath>

namespace npmv {

struct BandResult {
    double center = 0.0;
    double half_width = 0.0;
    Eigen::VectorXd contrast;
    double level = 0.95;  // 1 - alpha

    double low() const noexcept { return center - half_width; }
    double high() const noexcept { return center + half_width; }
};

/// Upper quantile chi2_{dof; prob}.
inline double chi_squared_quantile(int dof, double prob) {
    if (dof < 1) throw std::invalid_argument("chi-square degrees of freedom must be >= 1");
    if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("chi-square probability must be in (0, 1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), prob);
}

/// sqrt(phi_K * chi2 * a'Sigma a / (n b^k f_hat)); `local_mass` is n b^k f_hat(x).
inline double band_half_width(double phi_K, double chi2, double contrast_variance, double local_mass) {
    if (!(local_mass > 0.0)) throw DegeneratePointError("band requires positive n b^k f_hat(x)");
    return std::sqrt(std::max(0.0, phi_K * chi2 * contrast_variance / local_mass));
}

/// Band for every basis contrast e_1..e_p at x, sharing one set of fits.
inline std::vector<BandResult> basis_bands(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const KernelSpec& spec, const Bandwidth& b, double alpha,
                                           const Eigen::Ref<const Eigen::MatrixXd>& fits) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
    const MeanEstimate narrow = estimate_mean(data, x, spec, b);
    if (!(narrow.density > 0.0)) throw DegeneratePointError("non-positive density at evaluation point");
    const Eigen::VectorXd center = jackknife_mean(data, x, spec, b);
    const CovEstimate cov = estimate_cov(data, x, spec, b, fits);

    const double chi2 = chi_squared_quantile(static_cast<int>(data.p()), 1.0 - alpha);
    const double phi = jackknife_phi(spec);
    const double local_mass =
        static_cast<double>(data.n()) * std::pow(b.value(), spec.dim()) * narrow.density;

    std::vector<BandResult> out;
    out.reserve(data.p());
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        BandResult r;
        r.contrast = Eigen::VectorXd::Unit(data.p(), j);
        r.center = center(j);
        r.half_width = band_half_width(phi, chi2, cov.matrix(j, j), local_mass);
        r.level = 1.0 - alpha;
        out.push_back(std::move(r));
    }
    return out;
}

inline BandResult confidence_band(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const KernelSpec& spec, const Bandwidth& b,
                                  const Eigen::Ref<const Eigen::VectorXd>& a, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
    if (a.size() != data.p()) throw std::invalid_argument("contrast dimension does not match response dimension");
    const MeanEstimate narrow = estimate_mean(data, x, spec, b);
    if (!(narrow.density > 0.0)) throw DegeneratePointError("non-positive density at evaluation point");
    const Eigen::VectorXd center = jackknife_mean(data, x, spec, b);
    const CovEstimate cov = estimate_cov(data, x, spec, b, b);

    const double chi2 = chi_squared_quantile(static_cast<int>(data.p()), 1.0 - alpha);
    const double local_mass =
        static_cast<double>(data.n()) * std::pow(b.value(), spec.dim()) * narrow.density;

    BandResult r;
    r.contrast = a;
    r.center = a.dot(center);
    r.half_width = band_half_width(jackknife_phi(spec), chi2, a.dot(cov.matrix * a), local_mass);
    r.level = 1.0 - alpha;
    return r;
}

}  // namespace npmv
