#include "npmv/kernels.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using npmv::Bandwidth;
using npmv::KernelFamily;
using npmv::KernelSpec;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Closed forms for the radial Epanechnikov and Gaussian kernels in any dimension:
//   Epanechnikov: psi = k / (2 (k + 4)),   phi = 2 (k + 2) / (c_k (k + 4))
//   Gaussian:     psi = k / 2,             phi = (4 pi)^{-k/2}
double ball_volume(int k) { return std::pow(std::numbers::pi, k / 2.0) / std::tgamma(k / 2.0 + 1.0); }

}  // namespace

TEST(Kernels, EpanechnikovValuesFromExamples) {
    EXPECT_DOUBLE_EQ(npmv::kernel_eval(KernelSpec(KernelFamily::Epanechnikov, 1), vec({0.0})), 0.75);
    EXPECT_EQ(npmv::kernel_eval(KernelSpec(KernelFamily::Epanechnikov, 2), vec({1.2, 0.0})), 0.0);
    EXPECT_NEAR(npmv::kernel_eval(KernelSpec(KernelFamily::Epanechnikov, 2), vec({0.0, 0.0})), 2.0 / std::numbers::pi,
                1e-15);
}

TEST(Kernels, DimensionMismatchIsRejected) {
    const KernelSpec spec(KernelFamily::Epanechnikov, 2);
    EXPECT_THROW(npmv::kernel_eval(spec, vec({0.0})), std::invalid_argument);
    EXPECT_THROW(KernelSpec(KernelFamily::Gaussian, 0), std::invalid_argument);
    EXPECT_THROW(Bandwidth(0.0), std::invalid_argument);
    EXPECT_THROW(Bandwidth(-1.0), std::invalid_argument);
}

TEST(Kernels, ScaledKernelExamples) {
    const KernelSpec spec(KernelFamily::Epanechnikov, 1);
    EXPECT_DOUBLE_EQ(npmv::scaled_kernel(spec, Bandwidth(1.0), vec({0.0})), 0.75);
    EXPECT_DOUBLE_EQ(npmv::scaled_kernel(spec, Bandwidth(0.5), vec({0.0})), 1.5);
    EXPECT_EQ(npmv::scaled_kernel(spec, Bandwidth(0.5), vec({0.6})), 0.0);
}

TEST(Kernels, OneDimensionalConstants) {
    const auto e = npmv::kernel_constants(KernelSpec(KernelFamily::Epanechnikov, 1));
    EXPECT_NEAR(e.phi_K, 0.6, 1e-12);
    EXPECT_NEAR(e.psi_K, 0.1, 1e-12);
    const auto g = npmv::kernel_constants(KernelSpec(KernelFamily::Gaussian, 1));
    EXPECT_NEAR(g.psi_K, 0.5, 1e-12);
    EXPECT_NEAR(g.phi_K, 1.0 / (2.0 * std::sqrt(std::numbers::pi)), 1e-12);
}

TEST(Kernels, QuadratureConstantsMatchClosedForms) {
    for (int k = 2; k <= 5; ++k) {
        const auto e = npmv::kernel_constants(KernelSpec(KernelFamily::Epanechnikov, k));
        const double psi_e = k / (2.0 * (k + 4.0));
        const double phi_e = 2.0 * (k + 2.0) / (ball_volume(k) * (k + 4.0));
        EXPECT_NEAR(e.psi_K / psi_e, 1.0, 1e-6) << "k=" << k;
        EXPECT_NEAR(e.phi_K / phi_e, 1.0, 1e-6) << "k=" << k;

        const auto g = npmv::kernel_constants(KernelSpec(KernelFamily::Gaussian, k));
        EXPECT_NEAR(g.psi_K / (k / 2.0), 1.0, 1e-6) << "k=" << k;
        EXPECT_NEAR(g.phi_K / std::pow(4.0 * std::numbers::pi, -k / 2.0), 1.0, 1e-6) << "k=" << k;
    }
}

TEST(Kernels, JackknifePhiGaussianClosedForm) {
    // K* = 2 N(0, I) - N(0, 2I); int K*^2 = 4 (4pi)^{-k/2} - 4 (6pi)^{-k/2} + (8pi)^{-k/2}
    for (int k = 1; k <= 3; ++k) {
        const double pi = std::numbers::pi;
        const double expected =
            4.0 * std::pow(4.0 * pi, -k / 2.0) - 4.0 * std::pow(6.0 * pi, -k / 2.0) + std::pow(8.0 * pi, -k / 2.0);
        EXPECT_NEAR(npmv::jackknife_phi(KernelSpec(KernelFamily::Gaussian, k)) / expected, 1.0, 1e-8) << "k=" << k;
    }
}

TEST(Kernels, JackknifePhiEpanechnikovMatchesCubature) {
    for (int k = 1; k <= 2; ++k) {
        auto jk = [k](const Eigen::VectorXd& t) {
            const double v = 2.0 * oracle::epanechnikov(t) -
                             std::pow(2.0, -k / 2.0) * oracle::epanechnikov(t / std::numbers::sqrt2);
            return v * v;
        };
        const double cube = oracle::cube_integral(jk, k, std::numbers::sqrt2, k == 1 ? 200000 : 1200);
        EXPECT_NEAR(npmv::jackknife_phi(KernelSpec(KernelFamily::Epanechnikov, k)) / cube, 1.0, 1e-4) << "k=" << k;
    }
    // the jackknife combination inflates the variance constant
    for (int k = 1; k <= 4; ++k) {
        const KernelSpec spec(KernelFamily::Epanechnikov, k);
        EXPECT_GT(npmv::jackknife_phi(spec), npmv::kernel_constants(spec).phi_K);
    }
}

TEST(Kernels, NormalizationByCubature) {
    for (int k = 1; k <= 3; ++k) {
        const KernelSpec epa(KernelFamily::Epanechnikov, k);
        const KernelSpec gau(KernelFamily::Gaussian, k);
        const int m = k == 1 ? 20000 : (k == 2 ? 1000 : 120);
        const double ie = oracle::cube_integral([&](const Eigen::VectorXd& u) { return npmv::kernel_eval(epa, u); },
                                                k, 1.0, m);
        const double ig = oracle::cube_integral([&](const Eigen::VectorXd& u) { return npmv::kernel_eval(gau, u); },
                                                k, 8.0, m);
        EXPECT_NEAR(ie, 1.0, 1e-3) << "Epanechnikov k=" << k;
        EXPECT_NEAR(ig, 1.0, 1e-3) << "Gaussian k=" << k;
    }
}

TEST(Kernels, ScaledKernelIntegratesToOne) {
    const KernelSpec spec(KernelFamily::Epanechnikov, 2);
    for (const double b : {0.1, 1.0, 10.0}) {
        const double integral = oracle::cube_integral(
            [&](const Eigen::VectorXd& v) { return npmv::scaled_kernel(spec, Bandwidth(b), v); }, 2, b, 1000);
        EXPECT_NEAR(integral, 1.0, 1e-3) << "b=" << b;
    }
}

TEST(Kernels, SymmetryNonNegativityAndSupport) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (const auto family : {KernelFamily::Epanechnikov, KernelFamily::Gaussian}) {
        for (int k = 1; k <= 3; ++k) {
            const KernelSpec spec(family, k);
            for (int i = 0; i < 1000; ++i) {
                Eigen::VectorXd u(k);
                for (int j = 0; j < k; ++j) u(j) = g(rng);
                const double kv = npmv::kernel_eval(spec, u);
                EXPECT_EQ(kv, npmv::kernel_eval(spec, -u));
                EXPECT_GE(kv, 0.0);
                if (family == KernelFamily::Epanechnikov && u.norm() > 1.0) EXPECT_EQ(kv, 0.0);
            }
        }
    }
}

TEST(Kernels, AgreesWithTextbookFormula) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-1.2, 1.2);
    for (int k = 1; k <= 4; ++k) {
        const KernelSpec spec(KernelFamily::Epanechnikov, k);
        for (int i = 0; i < 200; ++i) {
            Eigen::VectorXd u(k);
            for (int j = 0; j < k; ++j) u(j) = unif(rng);
            EXPECT_NEAR(npmv::kernel_eval(spec, u), oracle::epanechnikov(u), 1e-14);
        }
    }
}

TEST(Kernels, FamilyNamesRoundTrip) {
    for (const auto f : {KernelFamily::Epanechnikov, KernelFamily::Gaussian}) {
        EXPECT_EQ(npmv::kernel_family_from_string(npmv::to_string(f)), f);
    }
    EXPECT_THROW(npmv::kernel_family_from_string("box"), std::invalid_argument);
}
