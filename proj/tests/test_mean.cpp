#include "npmv/confidence_band.hpp"
#include "npmv/mean.hpp"
#include "npmv/sim.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace npmv;

namespace {

const KernelSpec kEpa1(KernelFamily::Epanechnikov, 1);

Eigen::MatrixXd col(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) { return col(v).col(0); }

Dataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, Eigen::Index k) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd y(n, p), x(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) y(i, j) = g(rng);
        for (Eigen::Index j = 0; j < k; ++j) x(i, j) = g(rng);
    }
    return Dataset(y, x);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

}  // namespace

TEST(Dataset, StandardizesBySampleSd) {
    const Dataset d(col({1, 2, 3}), col({0, 2, 4}));
    EXPECT_DOUBLE_EQ(d.covariate_center()(0), 2.0);
    EXPECT_DOUBLE_EQ(d.covariate_scale()(0), 2.0);
    EXPECT_DOUBLE_EQ(d.standardized()(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(d.destandardize(d.standardize(vec({3.5})))(0), 3.5);
}

TEST(Dataset, RejectsInvalidInput) {
    EXPECT_THROW(Dataset(Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 1)), std::invalid_argument);
    EXPECT_THROW(Dataset(col({1, 2}), col({1})), std::invalid_argument);
    EXPECT_THROW(Dataset(col({1, std::nan("")}), col({1, 2})), std::invalid_argument);
    EXPECT_THROW(Dataset(col({1, 2}), col({1, 2}), {"a"}), std::invalid_argument);
}

TEST(NwWeights, SingleObservation) {
    const Dataset d(col({3.0}), col({1.0}));
    const auto w = nw_weights(d, vec({0.0}), kEpa1, Bandwidth(1.0));
    ASSERT_EQ(w.size(), 1);
    EXPECT_DOUBLE_EQ(w(0), 1.0);
}

TEST(NwWeights, IdenticalCovariatesGiveUniformWeights) {
    const Dataset d(col({1, 2, 3, 4}), col({5, 5, 5, 5}));
    const auto w = nw_weights(d, d.standardize(vec({5.0})), kEpa1, Bandwidth(0.3));
    for (Eigen::Index t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(w(t), 0.25);
}

TEST(NwWeights, HandEvaluatedPair) {
    const Dataset d = Dataset::unscaled(col({0, 0}), col({0.0, 0.5}));
    const auto w = nw_weights(d, vec({0.0}), kEpa1, Bandwidth(1.0));
    EXPECT_NEAR(w(0), 0.75 / 1.3125, 1e-15);
    EXPECT_NEAR(w(1), 0.5625 / 1.3125, 1e-15);
    EXPECT_NEAR(w(0), 0.5714, 1e-4);
}

TEST(NwWeights, EmptyNeighborhoodIsAnError) {
    const Dataset d = Dataset::unscaled(col({1, 2}), col({0.0, 0.1}));
    try {
        nw_weights(d, vec({5.0}), kEpa1, Bandwidth(1.0));
        FAIL() << "expected EmptyNeighborhoodError";
    } catch (const EmptyNeighborhoodError& e) {
        EXPECT_EQ(e.category(), "empty-neighborhood");
    }
}

TEST(NwWeights, SumToOneAndLocalize) {
    std::mt19937_64 rng(3);
    const Dataset d = random_dataset(rng, 200, 2, 2);
    const KernelSpec spec(KernelFamily::Epanechnikov, 2);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector2d x(u(rng), u(rng));
        const Bandwidth b(0.6);
        const auto w = nw_weights(d, x, spec, b);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
        EXPECT_GE(w.minCoeff(), 0.0);
        for (Eigen::Index t = 0; t < d.n(); ++t) {
            if ((x - d.standardized().row(t).transpose()).norm() > b.value()) EXPECT_EQ(w(t), 0.0);
        }
    }
}

TEST(EstimateMean, Examples) {
    const Dataset same(Eigen::MatrixXd{{1, 2}, {3, 6}, {5, 1}}, col({2, 2, 2}));
    const auto m = estimate_mean(same, same.standardized().row(0).transpose(), kEpa1, Bandwidth(0.5));
    EXPECT_NEAR(m.point(0), 3.0, 1e-15);
    EXPECT_NEAR(m.point(1), 3.0, 1e-15);

    const Dataset one(Eigen::MatrixXd{{4, -1}}, col({0.3}));
    EXPECT_EQ(estimate_mean(one, vec({0.0}), kEpa1, Bandwidth(1.0)).point, Eigen::Vector2d(4, -1));

    const Dataset pair = Dataset::unscaled(Eigen::MatrixXd{{1, 0}, {0, 1}}, col({0.0, 0.5}));
    const auto mp = estimate_mean(pair, vec({0.0}), kEpa1, Bandwidth(1.0));
    EXPECT_NEAR(mp.point(0), 0.75 / 1.3125, 1e-15);
    EXPECT_NEAR(mp.point(1), 0.5625 / 1.3125, 1e-15);
    // f_hat = (n b^k)^{-1} sum K((x - X_t) / b)
    EXPECT_NEAR(mp.density, (0.75 + 0.5625) / 2.0, 1e-15);
    EXPECT_NEAR(mp.effective_mass, 0.75 + 0.5625, 1e-15);
}

TEST(EstimateMean, DensityUsesBandwidthScaling) {
    const Dataset d = Dataset::unscaled(col({0, 0, 0}), col({0.0, 0.1, -0.2}));
    const double b = 0.5;
    double expected = 0.0;
    for (double xt : {0.0, 0.1, -0.2}) expected += 0.75 * (1.0 - (xt / b) * (xt / b));
    expected /= 3.0 * b;
    EXPECT_NEAR(estimate_mean(d, vec({0.0}), kEpa1, Bandwidth(b)).density, expected, 1e-15);
}

TEST(EstimateMean, MatchesDirectLoopOracle) {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 40; ++rep) {
        const Eigen::Index n = 5 + rep % 16;
        const Eigen::Index k = 1 + rep % 3;
        const Dataset d = random_dataset(rng, n, 1 + rep % 3, k);
        const KernelSpec spec(KernelFamily::Epanechnikov, static_cast<int>(k));
        const Eigen::VectorXd x = d.standardized().row(rep % n).transpose();
        const double b = 1.5;
        const auto est = estimate_mean(d, x, spec, Bandwidth(b));
        const auto ref = oracle::nw_mean(d.standardized(), d.responses(), x, b);
        EXPECT_LE((est.point - ref).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((nw_weights(d, x, spec, Bandwidth(b)) - oracle::nw_weights(d.standardized(), x, b))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-12);
    }
}

TEST(EstimateMean, AffineEquivariance) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    const KernelSpec spec(KernelFamily::Epanechnikov, 2);
    for (int rep = 0; rep < 20; ++rep) {
        const Dataset d = random_dataset(rng, 60, 3, 2);
        Eigen::MatrixXd a(3, 3);
        Eigen::VectorXd c(3);
        for (int i = 0; i < 3; ++i) {
            c(i) = g(rng);
            for (int j = 0; j < 3; ++j) a(i, j) = g(rng);
        }
        const Dataset t = d.with_responses((d.responses() * a.transpose()).rowwise() + c.transpose());
        const Eigen::VectorXd x = d.standardized().row(rep).transpose();
        const auto m = estimate_mean(d, x, spec, Bandwidth(1.0)).point;
        const auto mt = estimate_mean(t, x, spec, Bandwidth(1.0)).point;
        EXPECT_LE((mt - (a * m + c)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(EstimateMean, PointInsideConvexHullForP1) {
    std::mt19937_64 rng(5);
    const Dataset d = random_dataset(rng, 100, 1, 1);
    const auto m = estimate_mean(d, vec({0.2}), kEpa1, Bandwidth(0.5)).point(0);
    EXPECT_GE(m, d.responses().minCoeff());
    EXPECT_LE(m, d.responses().maxCoeff());
}

TEST(Jackknife, ConstantResponseIsUnchanged) {
    std::mt19937_64 rng(9);
    const Dataset base = random_dataset(rng, 50, 2, 1);
    const Dataset d = base.with_responses(Eigen::MatrixXd::Constant(50, 2, 1.7));
    const auto j = jackknife_mean(d, vec({0.0}), kEpa1, Bandwidth(0.5));
    EXPECT_NEAR(j(0), 1.7, 1e-14);
    EXPECT_NEAR(j(1), 1.7, 1e-14);
}

TEST(Jackknife, IsTwiceNarrowMinusWide) {
    std::mt19937_64 rng(10);
    const Dataset d = random_dataset(rng, 80, 2, 1);
    const Bandwidth b(0.4);
    const auto narrow = estimate_mean(d, vec({0.1}), kEpa1, b).point;
    const auto wide = estimate_mean(d, vec({0.1}), kEpa1, Bandwidth(0.4 * std::numbers::sqrt2)).point;
    const auto j = jackknife_mean(d, vec({0.1}), kEpa1, b);
    EXPECT_LE((j - (2.0 * narrow - wide)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jackknife, ReducesBiasOfLinearSignalOnUnevenDesign) {
    // Y = X on a design whose density increases with x; the local-constant fit
    // is pulled toward the denser side, and the jackknife removes the O(b^2) part.
    const int n = 2001;
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = std::sqrt((i + 0.5) / n);
    const Dataset d = Dataset::unscaled(x, x);
    const Bandwidth b(0.15);
    for (const double at : {0.35, 0.5, 0.65}) {
        const double plain = estimate_mean(d, vec({at}), kEpa1, b).point(0);
        const double corrected = jackknife_mean(d, vec({at}), kEpa1, b)(0);
        EXPECT_LT(std::abs(corrected - at), std::abs(plain - at)) << "x=" << at;
    }
}

TEST(ConfidenceBand, ChiSquareQuantileAgainstClosedForms) {
    // p = 2: chi2 is exponential with mean 2, so the quantile is -2 ln(alpha)
    for (const double alpha : {0.01, 0.05, 0.1, 0.5}) {
        EXPECT_NEAR(chi_squared_quantile(2, 1.0 - alpha) / (-2.0 * std::log(alpha)), 1.0, 1e-9);
    }
    const double z = oracle::normal_quantile(0.975);
    EXPECT_NEAR(chi_squared_quantile(1, 0.95) / (z * z), 1.0, 1e-9);
    EXPECT_THROW(chi_squared_quantile(0, 0.5), std::invalid_argument);
    EXPECT_THROW(chi_squared_quantile(2, 1.0), std::invalid_argument);
}

TEST(ConfidenceBand, HalfWidthExamples) {
    const double chi2 = chi_squared_quantile(2, 0.95);
    EXPECT_NEAR(chi2, 5.9915, 1e-4);
    const double hw = band_half_width(0.6, chi2, 1.0, 1000.0);
    EXPECT_NEAR(hw, std::sqrt(0.6 * 5.991464547107979 / 1000.0), 1e-12);
    EXPECT_NEAR(hw, 0.0600, 1e-4);
    EXPECT_NEAR(band_half_width(0.6, chi2, 1.0, 4000.0), hw / 2.0, 1e-15);
    EXPECT_EQ(band_half_width(0.6, chi2, 0.0, 1000.0), 0.0);
    EXPECT_THROW(band_half_width(0.6, chi2, 1.0, 0.0), DegeneratePointError);
}

TEST(ConfidenceBand, MonotoneInMassAndContrastVariance) {
    double prev = std::numeric_limits<double>::infinity();
    for (const double mass : {10.0, 100.0, 1000.0, 10000.0}) {
        const double hw = band_half_width(0.6, 5.99, 1.0, mass);
        EXPECT_LT(hw, prev);
        prev = hw;
    }
    EXPECT_LT(band_half_width(0.6, 5.99, 1.0, 100.0), band_half_width(0.6, 5.99, 2.0, 100.0));
}

TEST(ConfidenceBand, NullContrastAndCenter) {
    std::mt19937_64 rng(12);
    const Dataset d = random_dataset(rng, 300, 2, 1);
    const Eigen::VectorXd x = vec({0.0});
    const auto zero = confidence_band(d, x, kEpa1, Bandwidth(0.6), Eigen::Vector2d::Zero(), 0.05);
    EXPECT_EQ(zero.half_width, 0.0);
    EXPECT_EQ(zero.center, 0.0);

    const Eigen::Vector2d a(1.0, -2.0);
    const auto band = confidence_band(d, x, kEpa1, Bandwidth(0.6), a, 0.05);
    EXPECT_NEAR(band.center, a.dot(jackknife_mean(d, x, kEpa1, Bandwidth(0.6))), 1e-14);
    EXPECT_GT(band.half_width, 0.0);
    EXPECT_DOUBLE_EQ(band.level, 0.95);
    EXPECT_THROW(confidence_band(d, x, kEpa1, Bandwidth(0.6), a, 1.5), std::invalid_argument);
}

TEST(ConfidenceBand, BasisBandsMatchSingleContrast) {
    std::mt19937_64 rng(13);
    const Dataset d = random_dataset(rng, 200, 2, 1);
    const Bandwidth b(0.7);
    const auto fits = fitted_means(d, kEpa1, b);
    const auto bands = basis_bands(d, vec({0.3}), kEpa1, b, 0.05, fits);
    for (int j = 0; j < 2; ++j) {
        const auto single = confidence_band(d, vec({0.3}), kEpa1, b, Eigen::Vector2d::Unit(j), 0.05);
        EXPECT_NEAR(bands[j].center, single.center, 1e-14);
        EXPECT_NEAR(bands[j].half_width, single.half_width, 1e-14);
        EXPECT_LE(bands[j].low(), bands[j].high());
    }
}

TEST(EstimateMean, EmpiricalConsistencyOnSimulationDesign) {
    McPlan plan;
    plan.targets = {McTarget::mean()};
    plan.oracle_draws = 2000;
    plan.threads = 1;
    const ErrorOracle oracle = error_oracle(ErrorDist::Normal, plan.targets, plan.oracle_draws, 1, plan.irls);
    std::vector<double> medians;
    for (const std::size_t n : {100u, 500u, 1000u}) {
        std::vector<double> rmse;
        for (std::size_t rep = 0; rep < 20; ++rep) {
            const auto r = detail::run_replication(plan, n, ErrorDist::Normal, rep, oracle).targets[0];
            rmse.push_back(std::sqrt(r.sq_sum / static_cast<double>(r.points)));
        }
        medians.push_back(median(rmse));
    }
    EXPECT_GT(medians[0], medians[1]);
    EXPECT_GT(medians[1], medians[2]);
}
