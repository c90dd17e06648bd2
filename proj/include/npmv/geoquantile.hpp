/**
 * @file geoquantile.hpp
 * @brief Conditional geometric quantiles fitted by iteratively reweighted least squares.
 *
 * For a direction u in the open unit ball the sample objective at x is
 *
 *     M(q) = n^{-1} sum_t K_b(x - X_t) ( |Y_t - q| + <u, Y_t - q> )
 *
 * and its minimizer q_hat(u, x) is the conditional geometric quantile. The
 * kernel weight multiplies both terms. Writing K_t = K_b(X_t - x), one IRLS
 * step from q is
 *
 *     w_t    = 1 / (K_t |Y_t - q| + theta)
 *     q_next = ( sum_t K_t u + sum_t w_t K_t^2 Y_t ) / sum_t w_t K_t^2
 *
 * which minimizes the quadratic majorizer |Y - q'|^2 / (2|Y - q|) + |Y - q| / 2
 * of every norm term. The direction term enters with unit weight so that fixed
 * points satisfy the first-order condition
 *
 *     sum_t K_t [ (Y_t - q) / |Y_t - q| + u ] = 0.
 *
 * theta > 0 keeps the weights finite when an iterate approaches a data point.
 */
#pragma once

#include "npmv/mean.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace npmv {

struct Direction {
    Eigen::VectorXd u;
    std::optional<double> level;  // tau this direction encodes, when built from a level

    static Direction from_vector(Eigen::VectorXd u) {
        if (u.size() < 1) throw std::invalid_argument("direction must have dimension >= 1");
        if (!(u.norm() < 1.0)) throw std::invalid_argument("direction must lie in the open unit ball");
        return Direction{std::move(u), std::nullopt};
    }
};

/// u = (2 tau - 1) (1/sqrt(p), ..., 1/sqrt(p)); tau = 0.5 gives the spatial median.
inline Direction direction_from_level(double tau, Eigen::Index p) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile level must be in (0, 1)");
    if (p < 1) throw std::invalid_argument("response dimension must be >= 1");
    const double c = (2.0 * tau - 1.0) / std::sqrt(static_cast<double>(p));
    return Direction{Eigen::VectorXd::Constant(p, c), tau};
}

struct IrlsConfig {
    int max_iter = 500;
    double tol = 1e-8;        // relative step: |q_next - q| <= tol (1 + |q|)
    double stabilizer = 1e-10;

    void validate() const {
        if (max_iter < 1) throw std::invalid_argument("IRLS max_iter must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("IRLS tolerance must be positive");
        if (!(stabilizer >= 0.0)) throw std::invalid_argument("IRLS stabilizer must be non-negative");
    }
};

struct QuantileEstimate {
    Eigen::VectorXd q;
    int iterations = 0;
    std::vector<double> objective_trace;
    double foc_residual_norm = 0.0;
    bool converged = false;
};

/// Responses with their kernel weights at one evaluation point.
struct WeightedCloud {
    Eigen::MatrixXd points;   // m x p
    Eigen::VectorXd weights;  // m, positive
    double normalizer = 1.0;  // the objective divides by this (the full sample size n)

    Eigen::Index dim() const noexcept { return points.cols(); }
};

inline WeightedCloud local_cloud(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const KernelSpec& spec, const Bandwidth& b) {
    const LocalWeights lw = local_weights(data, x, spec, b);
    WeightedCloud c;
    c.points.resize(static_cast<Eigen::Index>(lw.index.size()), data.p());
    c.weights.resize(static_cast<Eigen::Index>(lw.index.size()));
    for (std::size_t i = 0; i < lw.index.size(); ++i) {
        c.points.row(i) = data.responses().row(lw.index[i]);
        c.weights(i) = lw.kernel[i];
    }
    c.normalizer = static_cast<double>(data.n());
    return c;
}

/// Equally weighted sample (weight 1, normalizer m).
inline WeightedCloud uniform_cloud(Eigen::MatrixXd points) {
    WeightedCloud c;
    c.weights = Eigen::VectorXd::Ones(points.rows());
    c.normalizer = static_cast<double>(points.rows());
    c.points = std::move(points);
    return c;
}

namespace detail {

inline void check_direction(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() != c.dim()) throw std::invalid_argument("direction dimension does not match responses");
    if (c.points.rows() == 0) throw EmptyNeighborhoodError("no weighted observations");
}

}  // namespace detail

inline double objective_value(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u,
                              const Eigen::Ref<const Eigen::VectorXd>& q) {
    detail::check_direction(c, u);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < c.points.rows(); ++t) {
        const Eigen::VectorXd r = c.points.row(t).transpose() - q;
        acc += c.weights(t) * (r.norm() + u.dot(r));
    }
    return acc / c.normalizer;
}

inline double objective_value(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const KernelSpec& spec, const Bandwidth& b, const Direction& u,
                              const Eigen::Ref<const Eigen::VectorXd>& q) {
    return objective_value(local_cloud(data, x, spec, b), u.u, q);
}

inline Eigen::VectorXd irls_step(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u,
                                 const Eigen::Ref<const Eigen::VectorXd>& q, const IrlsConfig& cfg) {
    detail::check_direction(c, u);
    Eigen::VectorXd num = c.weights.sum() * u;
    double den = 0.0;
    for (Eigen::Index t = 0; t < c.points.rows(); ++t) {
        const double kt = c.weights(t);
        const double dist = (c.points.row(t).transpose() - q).norm();
        const double scaled = kt * dist + cfg.stabilizer;
        if (!(scaled > 0.0)) {
            throw std::domain_error("IRLS weight is infinite: iterate coincides with a data point and theta = 0");
        }
        const double wk2 = kt * kt / scaled;
        num += wk2 * c.points.row(t).transpose();
        den += wk2;
    }
    if (!(den > 0.0) || !std::isfinite(den)) throw EmptyNeighborhoodError("IRLS weights vanish");
    return num / den;
}

inline Eigen::VectorXd irls_step(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const KernelSpec& spec, const Bandwidth& b, const Direction& u,
                                 const Eigen::Ref<const Eigen::VectorXd>& q, const IrlsConfig& cfg) {
    return irls_step(local_cloud(data, x, spec, b), u.u, q, cfg);
}

struct FocReport {
    double residual = 0.0;   // normalized by the total kernel weight
    int coincident = 0;      // data points sitting on q, treated by subgradient
};

/**
 * Norm of sum_t K_t [ (Y_t - q)/|Y_t - q| + u ] / sum_t K_t.
 *
 * Points that coincide with q have no gradient; each contributes K_t u plus
 * any vector of length <= K_t, and the reported residual is the smallest norm
 * reachable that way (zero iff q is a minimizer).
 */
inline FocReport foc_diagnostics(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u,
                                 const Eigen::Ref<const Eigen::VectorXd>& q) {
    detail::check_direction(c, u);
    const double radius = 1e-12 * (1.0 + q.norm());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(c.dim());
    double slack = 0.0;
    FocReport rep;
    for (Eigen::Index t = 0; t < c.points.rows(); ++t) {
        const Eigen::VectorXd r = c.points.row(t).transpose() - q;
        const double d = r.norm();
        const double kt = c.weights(t);
        if (d <= radius) {
            slack += kt;
            ++rep.coincident;
            sum += kt * u;
        } else {
            sum += kt * (r / d + u);
        }
    }
    rep.residual = std::max(0.0, sum.norm() - slack) / c.weights.sum();
    return rep;
}

inline double foc_residual(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u,
                           const Eigen::Ref<const Eigen::VectorXd>& q) {
    return foc_diagnostics(c, u, q).residual;
}

inline double foc_residual(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const KernelSpec& spec, const Bandwidth& b, const Direction& u,
                           const Eigen::Ref<const Eigen::VectorXd>& q) {
    return foc_residual(local_cloud(data, x, spec, b), u.u, q);
}

/// IRLS from the weighted mean; trace holds M(q^(0)), M(q^(1)), ...
inline QuantileEstimate estimate_quantile(const WeightedCloud& c, const Eigen::Ref<const Eigen::VectorXd>& u,
                                          const IrlsConfig& cfg) {
    cfg.validate();
    detail::check_direction(c, u);
    if (!(u.norm() < 1.0)) throw std::invalid_argument("direction must lie in the open unit ball");

    QuantileEstimate est;
    const Eigen::RowVectorXd first = c.points.row(0);
    const bool degenerate = ((c.points.rowwise() - first).rowwise().squaredNorm().array() == 0.0).all();
    if (degenerate) {
        est.q = first.transpose();
        est.objective_trace.push_back(objective_value(c, u, est.q));
        est.converged = true;
        est.foc_residual_norm = foc_residual(c, u, est.q);
        return est;
    }

    Eigen::VectorXd q = (c.points.transpose() * c.weights) / c.weights.sum();
    est.objective_trace.push_back(objective_value(c, u, q));
    for (int it = 0; it < cfg.max_iter; ++it) {
        Eigen::VectorXd next;
        try {
            next = irls_step(c, u, q, cfg);
        } catch (const std::domain_error&) {
            break;  // theta = 0 and q landed on a data point; handled by the vertex check below
        }
        // Over-relax along the update direction while that keeps lowering the
        // objective; on flat stretches plain MM steps shrink geometrically.
        double m_next = objective_value(c, u, next);
        const Eigen::VectorXd dir = next - q;
        for (double s = 2.0; s <= 1024.0; s *= 2.0) {
            Eigen::VectorXd trial = q + s * dir;
            const double m_trial = objective_value(c, u, trial);
            if (!(m_trial < m_next)) break;
            next = std::move(trial);
            m_next = m_trial;
        }
        const double step = (next - q).norm();
        const double scale = 1.0 + q.norm();
        q = std::move(next);
        est.objective_trace.push_back(m_next);
        est.iterations = it + 1;
        if (step <= cfg.tol * scale) {
            est.converged = true;
            break;
        }
    }

    // The minimizer may sit exactly on a data point, where the iterates only
    // approach it geometrically. Snap when the nearest point is a verified minimizer.
    Eigen::Index nearest = 0;
    (c.points.rowwise() - q.transpose()).rowwise().squaredNorm().minCoeff(&nearest);
    const Eigen::VectorXd vertex = c.points.row(nearest).transpose();
    if (foc_residual(c, u, vertex) == 0.0) {
        const double m_vertex = objective_value(c, u, vertex);
        if (m_vertex <= est.objective_trace.back()) {
            q = vertex;
            est.objective_trace.push_back(m_vertex);
            est.converged = true;
        }
    }

    est.q = std::move(q);
    est.foc_residual_norm = foc_residual(c, u, est.q);
    return est;
}

inline QuantileEstimate estimate_quantile(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                          const KernelSpec& spec, const Bandwidth& b, const Direction& u,
                                          const IrlsConfig& cfg = {}) {
    return estimate_quantile(local_cloud(data, x, spec, b), u.u, cfg);
}

struct NoncrossingReport {
    bool ok = true;
    std::vector<double> levels;
    std::vector<QuantileEstimate> estimates;
    Eigen::MatrixXd distances;  // pairwise |q_i - q_j|
};

inline constexpr double kSeparationFloor = 1e-8;

inline NoncrossingReport check_noncrossing(const WeightedCloud& c, const std::vector<double>& levels,
                                           const IrlsConfig& cfg = {}) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw std::invalid_argument("quantile levels must be in (0, 1)");
        for (std::size_t j = 0; j < i; ++j) {
            if (levels[i] == levels[j]) throw std::invalid_argument("quantile levels must be distinct");
        }
    }
    NoncrossingReport rep;
    rep.levels = levels;
    for (const double tau : levels) {
        rep.estimates.push_back(estimate_quantile(c, direction_from_level(tau, c.dim()).u, cfg));
    }
    const auto m = static_cast<Eigen::Index>(levels.size());
    rep.distances = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double d = (rep.estimates[i].q - rep.estimates[j].q).norm();
            rep.distances(i, j) = rep.distances(j, i) = d;
            if (!(d > kSeparationFloor)) rep.ok = false;
        }
    }
    return rep;
}

inline NoncrossingReport check_noncrossing(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x,
                                           const KernelSpec& spec, const Bandwidth& b,
                                           const std::vector<double>& levels, const IrlsConfig& cfg = {}) {
    return check_noncrossing(local_cloud(data, x, spec, b), levels, cfg);
}

}  // namespace npmv
