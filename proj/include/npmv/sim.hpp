/**
 * @file sim.hpp
 * @brief Simulation design: AR(1) covariates with common innovations, two
 *        responses with additive errors, and the Monte Carlo RMSE harness.
 *
 * Covariates (k = 3):
 *
 *     X_{j,t}   = phi_j X_{j,t-1} + eps_{j,t}
 *     eps_{j,t} = sqrt(1 - lambda) xi_{j,t} + sqrt(lambda) zeta_t
 *
 * with xi, zeta i.i.d. N(0, 1), zeta shared across j, and X_0 drawn from the
 * stationary joint law (cov_ij = C_ij / (1 - phi_i phi_j), C = (1-lambda) I + lambda 11').
 *
 * Responses (p = 2):
 *
 *     Y_1 = (X_1 + X_2 + X_3) / 3 + e_1,     Y_2 = b_1 X_1 + b_2 X_2 + b_3 X_3 + e_2
 *
 * Errors are i.i.d. N(0,1), Student t_3, or Exp(1) - 1.
 *
 * Seeding: replication r uses mix64(master + r); covariates, errors and the
 * evaluation grid each draw from their own stream derived from that seed.
 */
#pragma once

#include "npmv/bandwidth.hpp"
#include "npmv/geoquantile.hpp"
#include "npmv/mean.hpp"
#include "npmv/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace npmv {

inline constexpr int kSimCovariates = 3;
inline constexpr int kSimResponses = 2;

enum class ErrorDist { Normal, StudentT3, ShiftedExponential };

inline std::string to_string(ErrorDist d) {
    switch (d) {
        case ErrorDist::Normal: return "normal";
        case ErrorDist::StudentT3: return "t3";
        case ErrorDist::ShiftedExponential: return "exponential";
    }
    return "unknown";
}

inline ErrorDist error_dist_from_string(const std::string& s) {
    if (s == "normal") return ErrorDist::Normal;
    if (s == "t3") return ErrorDist::StudentT3;
    if (s == "exponential") return ErrorDist::ShiftedExponential;
    throw std::invalid_argument("unknown error distribution '" + s + "' (normal | t3 | exponential)");
}

struct SimConfig {
    std::size_t n = 100;
    std::array<double, 3> ar_coeff{0.5, 0.5, 0.5};
    double common_innovation_weight = 0.5;
    std::array<double, 3> b_coeffs{0.5, 0.3, 0.2};
    ErrorDist error_dist = ErrorDist::Normal;
    std::uint64_t seed = 20210401;
    int replications = 50;

    void validate() const {
        if (n < 2) throw std::invalid_argument("simulation needs n >= 2");
        for (const double a : ar_coeff) {
            if (!(std::abs(a) < 1.0)) throw std::invalid_argument("AR coefficients must lie in (-1, 1)");
        }
        if (!(common_innovation_weight >= 0.0 && common_innovation_weight <= 1.0)) {
            throw std::invalid_argument("common innovation weight must lie in [0, 1]");
        }
        const double sum = b_coeffs[0] + b_coeffs[1] + b_coeffs[2];
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("b coefficients must sum to 1");
        if (replications < 1) throw std::invalid_argument("replications must be >= 1");
    }
};

namespace sim_stream {
inline constexpr std::uint64_t kCovariates = 1;
inline constexpr std::uint64_t kErrors = 2;
inline constexpr std::uint64_t kGrid = 3;
inline constexpr std::uint64_t kOracle = 0x6f7261636c65ULL;
}  // namespace sim_stream

inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication) {
    return mix64(master + replication);
}

/// n x 3 covariate path, deterministic in cfg.seed.
inline Eigen::MatrixXd simulate_covariates(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, sim_stream::kCovariates));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double lambda = cfg.common_innovation_weight;
    const double own = std::sqrt(1.0 - lambda);
    const double shared = std::sqrt(lambda);

    auto innovation = [&] {
        const double zeta = gauss(rng);
        Eigen::Vector3d eps;
        for (int j = 0; j < kSimCovariates; ++j) eps(j) = own * gauss(rng) + shared * zeta;
        return eps;
    };

    Eigen::Matrix3d stationary;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double c = (i == j ? 1.0 : lambda);
            stationary(i, j) = c / (1.0 - cfg.ar_coeff[i] * cfg.ar_coeff[j]);
        }
    }
    // Cholesky of the stationary covariance, applied to independent normals
    const Eigen::Matrix3d chol = Eigen::LLT<Eigen::Matrix3d>(stationary).matrixL();

    Eigen::MatrixXd x(cfg.n, kSimCovariates);
    Eigen::Vector3d z;
    for (int j = 0; j < 3; ++j) z(j) = gauss(rng);
    Eigen::Vector3d prev = chol * z;
    x.row(0) = prev.transpose();
    for (std::size_t t = 1; t < cfg.n; ++t) {
        const Eigen::Vector3d eps = innovation();
        for (int j = 0; j < 3; ++j) prev(j) = cfg.ar_coeff[j] * prev(j) + eps(j);
        x.row(static_cast<Eigen::Index>(t)) = prev.transpose();
    }
    return x;
}

/// n x 2 centered error draws.
inline Eigen::MatrixXd simulate_errors(std::size_t n, ErrorDist dist, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd e(n, kSimResponses);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::student_t_distribution<double> student(3.0);
    std::exponential_distribution<double> expo(1.0);
    for (std::size_t t = 0; t < n; ++t) {
        for (int j = 0; j < kSimResponses; ++j) {
            double v = 0.0;
            switch (dist) {
                case ErrorDist::Normal: v = gauss(rng); break;
                case ErrorDist::StudentT3: v = student(rng); break;
                case ErrorDist::ShiftedExponential: v = expo(rng) - 1.0; break;
            }
            e(static_cast<Eigen::Index>(t), j) = v;
        }
    }
    return e;
}

/// Noise-free responses at one raw covariate value.
inline Eigen::Vector2d regression_function(const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const std::array<double, 3>& b) {
    if (x.size() != kSimCovariates) throw std::invalid_argument("regression_function expects 3 covariates");
    return {(x(0) + x(1) + x(2)) / 3.0, b[0] * x(0) + b[1] * x(1) + b[2] * x(2)};
}

inline Eigen::MatrixXd responses_from_errors(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                             const std::array<double, 3>& b,
                                             const Eigen::Ref<const Eigen::MatrixXd>& errors) {
    if (x.cols() != kSimCovariates || errors.cols() != kSimResponses || errors.rows() != x.rows()) {
        throw std::invalid_argument("responses_from_errors: shape mismatch");
    }
    Eigen::MatrixXd y(x.rows(), kSimResponses);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        y.row(t) = (regression_function(x.row(t).transpose(), b) + errors.row(t).transpose()).transpose();
    }
    return y;
}

inline Eigen::MatrixXd simulate_responses(const Eigen::Ref<const Eigen::MatrixXd>& x, const SimConfig& cfg) {
    cfg.validate();
    const auto errors = simulate_errors(static_cast<std::size_t>(x.rows()), cfg.error_dist,
                                        derive_seed(cfg.seed, sim_stream::kErrors));
    return responses_from_errors(x, cfg.b_coeffs, errors);
}

/// One simulated sample as a Dataset (times are row numbers).
inline Dataset simulate_dataset(const SimConfig& cfg) {
    Eigen::MatrixXd x = simulate_covariates(cfg);
    Eigen::MatrixXd y = simulate_responses(x, cfg);
    return Dataset(std::move(y), std::move(x));
}

/// Rows whose standardized norm is within the 80th percentile; `count` of them drawn without replacement.
inline std::vector<Eigen::Index> central_grid_rows(const Dataset& data, std::size_t count, std::uint64_t seed) {
    const Eigen::VectorXd norms = data.standardized().rowwise().norm();
    std::vector<double> sorted(norms.data(), norms.data() + norms.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t cut = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(sorted.size()))) - 1;
    const double limit = sorted[std::min(cut, sorted.size() - 1)];
    std::vector<Eigen::Index> central;
    for (Eigen::Index t = 0; t < norms.size(); ++t) {
        if (norms(t) <= limit) central.push_back(t);
    }
    std::mt19937_64 rng(seed);
    const std::size_t take = std::min(count, central.size());
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, central.size() - 1);
        std::swap(central[i], central[pick(rng)]);
    }
    central.resize(take);
    return central;
}

struct McTarget {
    enum class Kind { Mean, Quantile };
    Kind kind = Kind::Mean;
    double tau = 0.5;

    static McTarget mean() { return {Kind::Mean, 0.0}; }
    static McTarget quantile(double tau) { return {Kind::Quantile, tau}; }

    std::string label() const {
        if (kind == Kind::Mean) return "mean";
        std::ostringstream os;
        os << "quantile-" << tau;
        return os.str();
    }
};

struct McPlan {
    SimConfig base;  // n and error_dist are overridden by the lists below
    std::vector<std::size_t> sample_sizes{100, 500, 1000};
    std::vector<ErrorDist> error_dists{ErrorDist::Normal, ErrorDist::ShiftedExponential, ErrorDist::StudentT3};
    std::vector<McTarget> targets{McTarget::mean(),          McTarget::quantile(0.05), McTarget::quantile(0.1),
                                  McTarget::quantile(0.5),   McTarget::quantile(0.9),  McTarget::quantile(0.95)};
    std::size_t grid_points = 25;
    std::size_t oracle_draws = 100000;
    double quantile_anchor_n = 100.0;
    KernelFamily kernel = KernelFamily::Epanechnikov;
    CvConfig cv;
    IrlsConfig irls;
    unsigned threads = default_thread_count();
};

struct McRow {
    std::size_t n = 0;
    ErrorDist error_dist = ErrorDist::Normal;
    std::string target;
    double rmse = 0.0;
    double relative_mape = 0.0;
    double mape = 0.0;
    int replications_used = 0;
    int failed_points = 0;
};

struct McReport {
    std::vector<McRow> rows;
    std::vector<std::string> log;  // discarded replications

    const McRow* find(std::size_t n, ErrorDist d, const std::string& target) const {
        for (const auto& r : rows) {
            if (r.n == n && r.error_dist == d && r.target == target) return &r;
        }
        return nullptr;
    }
};

/// Truth offsets from conditional draws: mean and geometric quantiles of the error law.
struct ErrorOracle {
    Eigen::Vector2d mean;
    std::vector<Eigen::VectorXd> quantiles;  // aligned with the plan's targets (unused for mean)
};

inline ErrorOracle error_oracle(ErrorDist dist, const std::vector<McTarget>& targets, std::size_t draws,
                                std::uint64_t seed, const IrlsConfig& irls) {
    const Eigen::MatrixXd e = simulate_errors(draws, dist, seed);
    ErrorOracle o;
    o.mean = e.colwise().mean().transpose();
    const WeightedCloud cloud = uniform_cloud(e);
    IrlsConfig tight = irls;
    tight.max_iter = std::max(tight.max_iter, 2000);
    for (const auto& t : targets) {
        if (t.kind == McTarget::Kind::Mean) {
            o.quantiles.emplace_back(o.mean);
        } else {
            o.quantiles.push_back(estimate_quantile(cloud, direction_from_level(t.tau, kSimResponses).u, tight).q);
        }
    }
    return o;
}

namespace detail {

struct TargetAccumulator {
    double sq_sum = 0.0;
    double ape_sum = 0.0;
    std::size_t points = 0;
    std::size_t ape_terms = 0;
    int failed = 0;
    bool discarded = false;
};

struct ReplicationResult {
    std::vector<TargetAccumulator> targets;
};

inline ReplicationResult run_replication(const McPlan& plan, std::size_t n, ErrorDist dist, std::size_t rep,
                                         const ErrorOracle& oracle) {
    SimConfig cfg = plan.base;
    cfg.n = n;
    cfg.error_dist = dist;
    cfg.seed = replication_seed(plan.base.seed, rep);
    const Dataset data = simulate_dataset(cfg);
    const KernelSpec spec(plan.kernel, kSimCovariates);

    const auto grid = central_grid_rows(data, plan.grid_points, derive_seed(cfg.seed, sim_stream::kGrid));
    const Bandwidth b_mean = blocked_cv_bandwidth(data, spec, plan.cv).selected;
    const Bandwidth b_quant = quantile_bandwidth(data.n(), kSimCovariates, b_mean.value(), plan.quantile_anchor_n);

    ReplicationResult res;
    res.targets.resize(plan.targets.size());
    for (std::size_t ti = 0; ti < plan.targets.size(); ++ti) {
        const McTarget& target = plan.targets[ti];
        TargetAccumulator& acc = res.targets[ti];
        for (const Eigen::Index row : grid) {
            const Eigen::VectorXd z = data.standardized().row(row).transpose();
            const Eigen::Vector2d signal = regression_function(data.covariates().row(row).transpose(), cfg.b_coeffs);
            Eigen::VectorXd estimate;
            Eigen::VectorXd truth;
            try {
                if (target.kind == McTarget::Kind::Mean) {
                    estimate = estimate_mean(data, z, spec, b_mean).point;
                    truth = signal + oracle.mean;
                } else {
                    const Direction u = direction_from_level(target.tau, kSimResponses);
                    estimate = estimate_quantile(data, z, spec, b_quant, u, plan.irls).q;
                    truth = signal + oracle.quantiles[ti];
                }
            } catch (const EmptyNeighborhoodError&) {
                ++acc.failed;
                continue;
            }
            const Eigen::VectorXd err = estimate - truth;
            acc.sq_sum += err.squaredNorm() / kSimResponses;
            ++acc.points;
            for (Eigen::Index j = 0; j < err.size(); ++j) {
                if (std::abs(truth(j)) > 1e-12) {
                    acc.ape_sum += std::abs(err(j)) / std::abs(truth(j));
                    ++acc.ape_terms;
                }
            }
        }
        acc.discarded = static_cast<double>(acc.failed) > 0.1 * static_cast<double>(grid.size());
    }
    return res;
}

}  // namespace detail

/**
 * Monte Carlo over every (sample size, error law) pair in the plan.
 *
 * RMSE pools squared errors over grid points, replications and the two
 * response coordinates. MAPE averages |error| / |truth| over the same terms;
 * relative MAPE divides by the MAPE of the first listed sample size.
 */
inline McReport run_monte_carlo(const McPlan& plan) {
    plan.base.validate();
    if (plan.sample_sizes.empty() || plan.error_dists.empty() || plan.targets.empty()) {
        throw std::invalid_argument("Monte Carlo plan needs sample sizes, error laws and targets");
    }
    for (const auto& t : plan.targets) {
        if (t.kind == McTarget::Kind::Quantile && !(t.tau > 0.0 && t.tau < 1.0)) {
            throw std::invalid_argument("quantile targets need tau in (0, 1)");
        }
    }

    std::vector<ErrorOracle> oracles(plan.error_dists.size());
    parallel_for(
        plan.error_dists.size(),
        [&](std::size_t d) {
            oracles[d] = error_oracle(plan.error_dists[d], plan.targets, plan.oracle_draws,
                                      derive_seed(plan.base.seed, sim_stream::kOracle + d), plan.irls);
        },
        plan.threads);

    const std::size_t reps = static_cast<std::size_t>(plan.base.replications);
    const std::size_t cells = plan.sample_sizes.size() * plan.error_dists.size();
    std::vector<detail::ReplicationResult> results(cells * reps);
    parallel_for(
        results.size(),
        [&](std::size_t idx) {
            const std::size_t rep = idx % reps;
            const std::size_t cell = idx / reps;
            const std::size_t d = cell % plan.error_dists.size();
            const std::size_t si = cell / plan.error_dists.size();
            results[idx] = detail::run_replication(plan, plan.sample_sizes[si], plan.error_dists[d], rep, oracles[d]);
        },
        plan.threads);

    McReport report;
    std::map<std::pair<std::size_t, std::size_t>, double> baseline_mape;  // (dist, target) -> MAPE
    for (std::size_t si = 0; si < plan.sample_sizes.size(); ++si) {
        for (std::size_t d = 0; d < plan.error_dists.size(); ++d) {
            const std::size_t cell = si * plan.error_dists.size() + d;
            for (std::size_t ti = 0; ti < plan.targets.size(); ++ti) {
                detail::TargetAccumulator total;
                McRow row;
                row.n = plan.sample_sizes[si];
                row.error_dist = plan.error_dists[d];
                row.target = plan.targets[ti].label();
                for (std::size_t rep = 0; rep < reps; ++rep) {
                    const auto& acc = results[cell * reps + rep].targets[ti];
                    row.failed_points += acc.failed;
                    if (acc.discarded) {
                        report.log.push_back("discarded replication " + std::to_string(rep) + " (n=" +
                                             std::to_string(row.n) + ", " + to_string(row.error_dist) + ", " +
                                             row.target + "): " + std::to_string(acc.failed) +
                                             " failed grid points");
                        continue;
                    }
                    ++row.replications_used;
                    total.sq_sum += acc.sq_sum;
                    total.points += acc.points;
                    total.ape_sum += acc.ape_sum;
                    total.ape_terms += acc.ape_terms;
                }
                const double nan = std::numeric_limits<double>::quiet_NaN();
                row.rmse = total.points ? std::sqrt(total.sq_sum / static_cast<double>(total.points)) : nan;
                row.mape = total.ape_terms ? total.ape_sum / static_cast<double>(total.ape_terms) : nan;
                if (si == 0) baseline_mape[{d, ti}] = row.mape;
                row.relative_mape = row.mape / baseline_mape[{d, ti}];
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

/// Single error law from cfg across the given sample sizes.
inline McReport run_monte_carlo(const SimConfig& cfg, const std::vector<McTarget>& targets,
                                std::vector<std::size_t> sample_sizes = {100, 500, 1000}) {
    McPlan plan;
    plan.base = cfg;
    plan.error_dists = {cfg.error_dist};
    plan.targets = targets;
    plan.sample_sizes = std::move(sample_sizes);
    return run_monte_carlo(plan);
}

inline std::string format_fixed(double v, int digits = 6) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline void write_mc_report_csv(const McReport& report, std::ostream& out) {
    out << "n,error_dist,target,rmse,relative_mape\n";
    for (const auto& r : report.rows) {
        out << r.n << ',' << to_string(r.error_dist) << ',' << r.target << ',' << format_fixed(r.rmse) << ','
            << format_fixed(r.relative_mape) << '\n';
    }
}

inline void print_mc_table(const McReport& report, std::ostream& out) {
    out << std::left << std::setw(7) << "n" << std::setw(13) << "error" << std::setw(16) << "target"
        << std::right << std::setw(10) << "RMSE" << std::setw(15) << "Rel. MAPE" << std::setw(7) << "reps"
        << '\n';
    out << std::string(68, '-') << '\n';
    for (const auto& r : report.rows) {
        out << std::left << std::setw(7) << r.n << std::setw(13) << to_string(r.error_dist) << std::setw(16)
            << r.target << std::right << std::setw(10) << format_fixed(r.rmse, 3) << std::setw(15)
            << format_fixed(r.relative_mape, 3) << std::setw(7) << r.replications_used << '\n';
    }
}

}  // namespace npmv
