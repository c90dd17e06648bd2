/**
 * @file kernels.hpp
 * @brief Radial multivariate kernels, bandwidth scaling, and kernel constants.
 *
 * Two families are provided, both radial in u:
 *
 *     Epanechnikov:  K(u) = (k + 2) / (2 c_k) * (1 - u'u) * 1{|u| <= 1},
 *                    c_k  = pi^{k/2} / Gamma(k/2 + 1)   (volume of the unit k-ball)
 *     Gaussian:      K(u) = (2 pi)^{-k/2} exp(-u'u / 2),  truncated at |u| = 8
 *
 * The scaled kernel is K_b(v) = b^{-k} K(v / b).
 *
 * The inference constants are
 *
 *     psi_K = 1/2 * int <t, t> K(t) dt,     phi_K = int K(t)^2 dt.
 *
 * For k = 1 they are returned in closed form. For k > 1 both integrands are
 * radial, so they reduce to one-dimensional integrals
 *
 *     int g(|t|) dt = S_{k-1} * int_0^R r^{k-1} g(r) dr,   S_{k-1} = 2 pi^{k/2} / Gamma(k/2)
 *
 * evaluated with Gauss-Kronrod quadrature over the (truncated) support.
 */
#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace npmv {

enum class KernelFamily { Epanechnikov, Gaussian };

inline std::string to_string(KernelFamily family) {
    return family == KernelFamily::Epanechnikov ? "epanechnikov" : "gaussian";
}

inline KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "epanechnikov") return KernelFamily::Epanechnikov;
    if (name == "gaussian") return KernelFamily::Gaussian;
    throw std::invalid_argument("unknown kernel family '" + name + "'");
}

/// Squared radius beyond which the Gaussian kernel is treated as zero (|u| > 8).
inline constexpr double kGaussianCutoffSq = 64.0;

class KernelSpec {
public:
    KernelSpec(KernelFamily family, int dim) : family_(family), dim_(dim) {
        if (dim < 1) throw std::invalid_argument("kernel dimension must be >= 1");
        if (family == KernelFamily::Epanechnikov) {
            const double half = 0.5 * dim;
            const double ball_volume = std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
            norm_ = (dim + 2.0) / (2.0 * ball_volume);
        } else {
            norm_ = std::pow(2.0 * std::numbers::pi, -0.5 * dim);
        }
    }

    KernelFamily family() const noexcept { return family_; }
    int dim() const noexcept { return dim_; }

    /// Kernel value as a function of the squared radius u'u.
    double profile(double sq_radius) const noexcept {
        if (family_ == KernelFamily::Epanechnikov) {
            return sq_radius <= 1.0 ? norm_ * (1.0 - sq_radius) : 0.0;
        }
        return sq_radius <= kGaussianCutoffSq ? norm_ * std::exp(-0.5 * sq_radius) : 0.0;
    }

    /// Radius outside which the kernel vanishes.
    double support_radius() const noexcept {
        return family_ == KernelFamily::Epanechnikov ? 1.0 : std::sqrt(kGaussianCutoffSq);
    }

private:
    KernelFamily family_;
    int dim_;
    double norm_;
};

class Bandwidth {
public:
    explicit Bandwidth(double value) : value_(value) {
        if (!(value > 0.0) || !std::isfinite(value)) {
            throw std::invalid_argument("bandwidth must be a positive finite number");
        }
    }
    double value() const noexcept { return value_; }
    friend bool operator==(const Bandwidth&, const Bandwidth&) = default;

private:
    double value_;
};

struct KernelConstants {
    double psi_K;
    double phi_K;
};

inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() != spec.dim()) {
        throw std::invalid_argument("kernel_eval: argument has dimension " + std::to_string(u.size()) +
                                    ", kernel expects " + std::to_string(spec.dim()));
    }
    return spec.profile(u.squaredNorm());
}

/// b^{-k} K(v / b).
inline double scaled_kernel(const KernelSpec& spec, const Bandwidth& b,
                            const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double h = b.value();
    return kernel_eval(spec, v / h) / std::pow(h, spec.dim());
}

inline KernelConstants kernel_constants(const KernelSpec& spec) {
    const int k = spec.dim();
    if (k == 1) {
        if (spec.family() == KernelFamily::Epanechnikov) return {0.1, 0.6};
        return {0.5, 0.5 / std::sqrt(std::numbers::pi)};
    }
    const double half = 0.5 * k;
    const double sphere = 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
    const double radius = spec.support_radius();

    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto radial = [&](auto&& g) {
        return sphere * Quad::integrate([&](double r) { return std::pow(r, k - 1) * g(r); },
                                        0.0, radius, 15, 1e-12);
    };
    const double psi = radial([&](double r) { return 0.5 * r * r * spec.profile(r * r); });
    const double phi = radial([&](double r) {
        const double kv = spec.profile(r * r);
        return kv * kv;
    });
    return {psi, phi};
}

/**
 * phi of the jackknife kernel K*(t) = 2 K(t) - 2^{-k/2} K(t / sqrt 2), the
 * effective kernel of 2 mu_hat_b - mu_hat_{sqrt(2) b}. Its variance constant
 * replaces phi_K when a band is centered at the bias-corrected mean.
 */
inline double jackknife_phi(const KernelSpec& spec) {
    const int k = spec.dim();
    const double half = 0.5 * k;
    const double sphere = 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
    const double wide = std::pow(2.0, -half);
    const double radius = spec.support_radius() * std::numbers::sqrt2;
    const double inner = spec.support_radius();

    using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto integrand = [&](double r) {
        const double v = 2.0 * spec.profile(r * r) - wide * spec.profile(0.5 * r * r);
        return std::pow(r, k - 1) * v * v;
    };
    // split at the narrow kernel's support edge, where the integrand has a kink
    return sphere * (Quad::integrate(integrand, 0.0, inner, 15, 1e-12) +
                     Quad::integrate(integrand, inner, radius, 15, 1e-12));
}

}  // namespace npmv
