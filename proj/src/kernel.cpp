#include "ital/kernel.hpp"

#include <cmath>
#include <sstream>

namespace ital {

void KernelConfig::validate() const {
    auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(sigma_var) || sigma_var <= 0.0) {
        throw ConfigError("kernel: sigma_var must be positive and finite");
    }
    if (bad(sigma_ls) || sigma_ls <= 0.0) {
        throw ConfigError("kernel: sigma_ls must be positive and finite");
    }
    if (bad(sigma_noise) || sigma_noise < 0.0) {
        throw ConfigError("kernel: sigma_noise must be nonnegative and finite");
    }
}

KernelMatrix::KernelMatrix(std::shared_ptr<const FeatureMatrix> features, KernelConfig config,
                           std::size_t memory_budget)
    : features_(std::move(features)), config_(config) {
    config_.validate();
    if (!features_ || features_->rows() == 0 || features_->cols() == 0) {
        throw ConfigError("kernel: feature matrix must have at least one row and one column");
    }
    for (Eigen::Index r = 0; r < features_->rows(); ++r) {
        if (!features_->row(r).allFinite()) {
            std::ostringstream msg;
            msg << "kernel: non-finite feature value in row " << r;
            throw ConfigError(msg.str());
        }
    }
    n_ = static_cast<Index>(features_->rows());
    gamma_ = 1.0 / (2.0 * config_.sigma_ls * config_.sigma_ls);

    const double bytes = static_cast<double>(n_) * static_cast<double>(n_) * sizeof(double);
    if (bytes <= static_cast<double>(memory_budget)) {
        dense_ = std::make_unique<Eigen::MatrixXd>(n_, n_);
        auto& K = *dense_;
        for (Index i = 0; i < n_; ++i) {
            K(i, i) = config_.diagonal();
            for (Index j = i + 1; j < n_; ++j) {
                const double v = evaluate(i, j);
                K(i, j) = v;
                K(j, i) = v;
            }
        }
    } else {
        const std::size_t row_bytes = n_ * sizeof(double);
        row_capacity_ = std::max<std::size_t>(64, memory_budget / std::max<std::size_t>(row_bytes, 1));
    }
}

double KernelMatrix::squared_distance(Index i, Index j) const {
    // Elementwise (a-b)^2 is exactly symmetric in floating point, unlike the
    // |a|^2 + |b|^2 - 2ab expansion.
    const auto& X = *features_;
    const double* a = X.row(static_cast<Eigen::Index>(i)).data();
    const double* b = X.row(static_cast<Eigen::Index>(j)).data();
    const auto d = static_cast<std::size_t>(X.cols());
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
        const double diff = a[t] - b[t];
        s += diff * diff;
    }
    return s;
}

double KernelMatrix::evaluate(Index i, Index j) const {
    if (i == j) {
        return config_.diagonal();
    }
    return config_.prior_variance() * std::exp(-gamma_ * squared_distance(i, j));
}

double KernelMatrix::operator()(Index i, Index j) const {
    if (dense_) {
        return (*dense_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    if (auto r = find_row(i)) {
        return (*r)(static_cast<Eigen::Index>(j));
    }
    return evaluate(i, j);
}

std::shared_ptr<const Eigen::VectorXd> KernelMatrix::find_row(Index i) const {
    std::lock_guard lock(cache_mutex_);
    auto it = rows_.find(i);
    if (it == rows_.end()) {
        return nullptr;
    }
    lru_.splice(lru_.begin(), lru_, it->second.second);
    return it->second.first;
}

std::shared_ptr<const Eigen::VectorXd> KernelMatrix::cached_row(Index i) const {
    if (auto r = find_row(i)) {
        return r;
    }
    auto row = std::make_shared<Eigen::VectorXd>(n_);
    for (Index j = 0; j < n_; ++j) {
        (*row)(static_cast<Eigen::Index>(j)) = evaluate(i, j);
    }
    std::lock_guard lock(cache_mutex_);
    auto it = rows_.find(i);
    if (it != rows_.end()) {
        return it->second.first;
    }
    lru_.push_front(i);
    rows_.emplace(i, std::make_pair(std::shared_ptr<const Eigen::VectorXd>(row), lru_.begin()));
    while (rows_.size() > row_capacity_) {
        rows_.erase(lru_.back());
        lru_.pop_back();
    }
    return row;
}

Eigen::MatrixXd KernelMatrix::block(std::span<const Index> rows, std::span<const Index> cols) const {
    Eigen::MatrixXd out(rows.size(), cols.size());
    if (dense_) {
        for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = 0; b < cols.size(); ++b) {
                out(a, b) = (*dense_)(rows[a], cols[b]);
            }
        }
        return out;
    }
    // Wide requests pull full rows through the cache; narrow ones are evaluated directly.
    const bool wide = cols.size() * 8 > n_;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        auto r = wide ? cached_row(rows[a]) : find_row(rows[a]);
        for (std::size_t b = 0; b < cols.size(); ++b) {
            out(a, b) = r ? (*r)(cols[b]) : evaluate(rows[a], cols[b]);
        }
    }
    return out;
}

Eigen::VectorXd KernelMatrix::row(Index i) const {
    if (dense_) {
        return dense_->row(static_cast<Eigen::Index>(i)).transpose();
    }
    return *cached_row(i);
}

const Eigen::MatrixXd& KernelMatrix::dense() const {
    if (!dense_) {
        throw ContractError("kernel: dense matrix requested but kernel is in lazy-row mode");
    }
    return *dense_;
}

std::shared_ptr<const KernelMatrix> compute_kernel_matrix(std::shared_ptr<const FeatureMatrix> features,
                                                          const KernelConfig& config,
                                                          std::size_t memory_budget) {
    return std::make_shared<const KernelMatrix>(std::move(features), config, memory_budget);
}

}  // namespace ital
