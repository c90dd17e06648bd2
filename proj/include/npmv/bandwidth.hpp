#pragma once

#include "npmv/mean.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

namespace npmv {

enum class CvLoss { SquaredError };

struct CvConfig {
    std::vector<double> candidate_grid{0.3, 0.5, 0.75, 1.0, 1.5, 2.0};
    int n_blocks = 5;
    CvLoss loss = CvLoss::SquaredError;
};

struct CvReport {
    Bandwidth selected{1.0};
    std::vector<double> candidates;
    std::vector<double> scores;        // mean squared prediction error per candidate
    Eigen::MatrixXd per_block_scores;  // candidates x blocks
    std::vector<int> empty_points;     // empty-neighborhood predictions per candidate
};

struct Block {
    Eigen::Index begin;
    Eigen::Index end;  // one past the last row
};

/// Contiguous blocks covering 0..n-1; the first n % n_blocks blocks get one extra row.
inline std::vector<Block> contiguous_blocks(Eigen::Index n, int n_blocks) {
    if (n_blocks < 1 || n < n_blocks) throw std::invalid_argument("need 1 <= n_blocks <= n");
    std::vector<Block> out;
    const Eigen::Index base = n / n_blocks;
    const Eigen::Index extra = n % n_blocks;
    Eigen::Index start = 0;
    for (int j = 0; j < n_blocks; ++j) {
        const Eigen::Index len = base + (j < extra ? 1 : 0);
        out.push_back({start, start + len});
        start += len;
    }
    return out;
}

/// Index of the smallest usable score; among equal scores the later (larger) candidate wins.
inline std::size_t argmin_candidate(const std::vector<double>& scores, const std::vector<bool>& usable = {}) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (!usable.empty() && !usable[c]) continue;
        if (!best || scores[c] <= scores[*best]) best = c;
    }
    if (!best) throw SelectionError("every bandwidth candidate leaves all prediction points without neighbors");
    return *best;
}

/**
 * Blocked cross-validation for the conditional-mean bandwidth.
 *
 * Each contiguous block is predicted from the remaining blocks; the score of
 * a candidate is the mean squared Euclidean prediction error over all rows.
 * A row whose neighborhood is empty is charged the squared error of the
 * training-block mean, the loss of a constant fallback prediction.
 * Ties go to the larger bandwidth.
 */
inline CvReport blocked_cv_bandwidth(const Dataset& data, const KernelSpec& spec, const CvConfig& cfg = {}) {
    if (cfg.candidate_grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
    for (std::size_t i = 0; i < cfg.candidate_grid.size(); ++i) {
        if (!(cfg.candidate_grid[i] > 0.0)) throw std::invalid_argument("bandwidth candidates must be positive");
        if (i > 0 && !(cfg.candidate_grid[i] > cfg.candidate_grid[i - 1])) {
            throw std::invalid_argument("bandwidth grid must be strictly increasing");
        }
    }
    if (cfg.n_blocks < 2) throw std::invalid_argument("blocked CV needs at least two blocks");
    if (data.n() < 2 * static_cast<Eigen::Index>(cfg.n_blocks)) {
        throw std::invalid_argument("blocked CV needs n >= 2 * n_blocks");
    }

    const auto blocks = contiguous_blocks(data.n(), cfg.n_blocks);
    std::vector<Dataset> train;
    std::vector<Eigen::VectorXd> train_mean;
    train.reserve(blocks.size());
    for (const Block& blk : blocks) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index t = 0; t < data.n(); ++t) {
            if (t < blk.begin || t >= blk.end) rows.push_back(t);
        }
        train.push_back(data.subset(rows));
        train_mean.push_back(train.back().responses().colwise().mean().transpose());
    }

    const auto nc = static_cast<Eigen::Index>(cfg.candidate_grid.size());
    CvReport rep;
    rep.candidates = cfg.candidate_grid;
    rep.scores.assign(cfg.candidate_grid.size(), 0.0);
    rep.empty_points.assign(cfg.candidate_grid.size(), 0);
    rep.per_block_scores = Eigen::MatrixXd::Zero(nc, cfg.n_blocks);

    for (Eigen::Index c = 0; c < nc; ++c) {
        const Bandwidth b(cfg.candidate_grid[c]);
        double total = 0.0;
        for (std::size_t j = 0; j < blocks.size(); ++j) {
            double block_sum = 0.0;
            for (Eigen::Index t = blocks[j].begin; t < blocks[j].end; ++t) {
                try {
                    const Eigen::VectorXd pred =
                        estimate_mean(train[j], data.standardized().row(t).transpose(), spec, b).point;
                    block_sum += (data.responses().row(t).transpose() - pred).squaredNorm();
                } catch (const EmptyNeighborhoodError&) {
                    block_sum += (data.responses().row(t).transpose() - train_mean[j]).squaredNorm();
                    ++rep.empty_points[c];
                }
            }
            rep.per_block_scores(c, static_cast<Eigen::Index>(j)) =
                block_sum / static_cast<double>(blocks[j].end - blocks[j].begin);
            total += block_sum;
        }
        rep.scores[c] = total / static_cast<double>(data.n());
    }

    std::vector<bool> usable(cfg.candidate_grid.size());
    for (Eigen::Index c = 0; c < nc; ++c) usable[c] = rep.empty_points[c] < data.n();
    rep.selected = Bandwidth(cfg.candidate_grid[argmin_candidate(rep.scores, usable)]);
    return rep;
}

/// scale * n^{-1/(k+4)}.
inline Bandwidth rate_bandwidth(Eigen::Index n, int k, double scale) {
    if (n < 2) throw std::invalid_argument("rate bandwidth needs n >= 2");
    if (k < 1) throw std::invalid_argument("rate bandwidth needs k >= 1");
    return Bandwidth(scale * std::pow(static_cast<double>(n), -1.0 / (k + 4.0)));
}

/// Quantile bandwidth: equals `anchor_bandwidth` at n = anchor_n and decays like n^{-1/(k+4)}.
inline Bandwidth quantile_bandwidth(Eigen::Index n, int k, double anchor_bandwidth, double anchor_n = 100.0) {
    if (!(anchor_n > 0.0)) throw std::invalid_argument("anchor sample size must be positive");
    return rate_bandwidth(n, k, anchor_bandwidth * std::pow(anchor_n, 1.0 / (k + 4.0)));
}

}  // namespace npmv
