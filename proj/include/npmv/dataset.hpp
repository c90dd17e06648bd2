#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace npmv {

/**
 * Paired multivariate series: responses Y (n x p) and covariates X (n x k),
 * with an optional time label per row.
 *
 * Covariates are standardized per coordinate by the sample mean and the
 * sample standard deviation (denominator n - 1). All kernel evaluations use
 * the standardized copy, so bandwidths and evaluation points live on that
 * scale. A coordinate with zero spread (or n = 1) keeps scale 1.
 */
class Dataset {
public:
    Dataset(Eigen::MatrixXd responses, Eigen::MatrixXd covariates,
            std::vector<std::string> times = {})
        : responses_(std::move(responses)), covariates_(std::move(covariates)), times_(std::move(times)) {
        validate();
        const Eigen::Index n = covariates_.rows();
        center_ = covariates_.colwise().mean().transpose();
        scale_ = Eigen::VectorXd::Ones(covariates_.cols());
        if (n > 1) {
            for (Eigen::Index j = 0; j < covariates_.cols(); ++j) {
                const double ss = (covariates_.col(j).array() - center_(j)).square().sum();
                const double sd = std::sqrt(ss / static_cast<double>(n - 1));
                if (sd > 0.0) scale_(j) = sd;
            }
        }
        restandardize();
    }

    /// Covariates used as given (center 0, scale 1), for data already on the kernel scale.
    static Dataset unscaled(Eigen::MatrixXd responses, Eigen::MatrixXd covariates,
                            std::vector<std::string> times = {}) {
        Dataset out(std::move(responses), std::move(covariates), std::move(times));
        out.center_.setZero();
        out.scale_.setOnes();
        out.restandardize();
        return out;
    }

    Eigen::Index n() const noexcept { return responses_.rows(); }
    Eigen::Index p() const noexcept { return responses_.cols(); }
    Eigen::Index k() const noexcept { return covariates_.cols(); }

    const Eigen::MatrixXd& responses() const noexcept { return responses_; }
    const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
    /// Standardized covariates, one observation per row.
    const Eigen::MatrixXd& standardized() const noexcept { return standardized_; }
    const std::vector<std::string>& times() const noexcept { return times_; }

    const Eigen::VectorXd& covariate_center() const noexcept { return center_; }
    const Eigen::VectorXd& covariate_scale() const noexcept { return scale_; }

    Eigen::VectorXd standardize(const Eigen::Ref<const Eigen::VectorXd>& raw) const {
        if (raw.size() != k()) throw std::invalid_argument("standardize: covariate dimension mismatch");
        return ((raw - center_).array() / scale_.array()).matrix();
    }

    Eigen::VectorXd destandardize(const Eigen::Ref<const Eigen::VectorXd>& z) const {
        if (z.size() != k()) throw std::invalid_argument("destandardize: covariate dimension mismatch");
        return (z.array() * scale_.array()).matrix() + center_;
    }

    /// Same covariates (and scaling), new responses.
    Dataset with_responses(Eigen::MatrixXd responses) const {
        if (responses.rows() != n()) throw std::invalid_argument("with_responses: row count mismatch");
        Dataset out = *this;
        out.responses_ = std::move(responses);
        out.validate();
        return out;
    }

    /// Row subset that keeps the parent's standardization.
    Dataset subset(std::span<const Eigen::Index> rows) const {
        if (rows.empty()) throw std::invalid_argument("subset: no rows selected");
        Eigen::MatrixXd y(rows.size(), p());
        Eigen::MatrixXd x(rows.size(), k());
        std::vector<std::string> t;
        if (!times_.empty()) t.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Eigen::Index r = rows[i];
            if (r < 0 || r >= n()) throw std::out_of_range("subset: row index out of range");
            y.row(i) = responses_.row(r);
            x.row(i) = covariates_.row(r);
            if (!times_.empty()) t.push_back(times_[r]);
        }
        Dataset out = *this;
        out.responses_ = std::move(y);
        out.covariates_ = std::move(x);
        out.times_ = std::move(t);
        out.restandardize();
        return out;
    }

private:
    void validate() const {
        if (responses_.rows() < 1) throw std::invalid_argument("dataset needs at least one observation");
        if (responses_.rows() != covariates_.rows()) {
            throw std::invalid_argument("responses and covariates have different row counts");
        }
        if (responses_.cols() < 1 || covariates_.cols() < 1) {
            throw std::invalid_argument("dataset needs at least one response and one covariate column");
        }
        if (!responses_.allFinite() || !covariates_.allFinite()) {
            throw std::invalid_argument("dataset contains non-finite entries");
        }
        if (!times_.empty() && static_cast<Eigen::Index>(times_.size()) != responses_.rows()) {
            throw std::invalid_argument("time index length does not match the number of rows");
        }
    }

    void restandardize() {
        standardized_ = (covariates_.rowwise() - center_.transpose()).array().rowwise() /
                        scale_.transpose().array();
    }

    Eigen::MatrixXd responses_;
    Eigen::MatrixXd covariates_;
    Eigen::MatrixXd standardized_;
    std::vector<std::string> times_;
    Eigen::VectorXd center_;
    Eigen::VectorXd scale_;
};

}  // namespace npmv
