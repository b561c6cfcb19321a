#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>

#include "ital/common.hpp"

namespace ital {

/// Hyper-parameters of the RBF kernel
/// K_ij = sigma_var^2 * exp(-|x_i - x_j|^2 / (2 sigma_ls^2)) + sigma_noise^2 * [i == j].
struct KernelConfig {
    double sigma_var = 1.0;
    double sigma_ls = 1.0;
    double sigma_noise = 0.1;

    /// Throws ConfigError unless sigma_var > 0, sigma_ls > 0 and sigma_noise >= 0.
    void validate() const;

    double prior_variance() const { return sigma_var * sigma_var; }
    double diagonal() const { return sigma_var * sigma_var + sigma_noise * sigma_noise; }

    friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// Kernel over the whole dataset. Held immutable after construction and safe to
/// share across threads.
///
/// When the dense n x n matrix fits into `memory_budget` bytes it is computed
/// up front. Otherwise entries are evaluated from the features on demand and
/// full rows are kept in a bounded LRU cache (the rows of labeled samples are
/// requested over and over during a retrieval session).
class KernelMatrix {
public:
    static constexpr std::size_t kDefaultMemoryBudget = std::size_t{1} << 30;

    KernelMatrix(std::shared_ptr<const FeatureMatrix> features, KernelConfig config,
                 std::size_t memory_budget = kDefaultMemoryBudget);

    KernelMatrix(const KernelMatrix&) = delete;
    KernelMatrix& operator=(const KernelMatrix&) = delete;

    Index size() const { return n_; }
    const KernelConfig& config() const { return config_; }
    bool is_dense() const { return dense_ != nullptr; }
    const FeatureMatrix& features() const { return *features_; }
    std::shared_ptr<const FeatureMatrix> feature_ptr() const { return features_; }

    double operator()(Index i, Index j) const;

    /// Sub-matrix K[rows, cols].
    Eigen::MatrixXd block(std::span<const Index> rows, std::span<const Index> cols) const;

    /// Full row i (length n).
    Eigen::VectorXd row(Index i) const;

    /// The dense matrix; throws ContractError in lazy mode.
    const Eigen::MatrixXd& dense() const;

private:
    double squared_distance(Index i, Index j) const;
    double evaluate(Index i, Index j) const;
    std::shared_ptr<const Eigen::VectorXd> cached_row(Index i) const;
    std::shared_ptr<const Eigen::VectorXd> find_row(Index i) const;

    std::shared_ptr<const FeatureMatrix> features_;
    KernelConfig config_;
    Index n_ = 0;
    double gamma_ = 0.0;  // 1 / (2 sigma_ls^2)
    std::unique_ptr<Eigen::MatrixXd> dense_;

    std::size_t row_capacity_ = 0;
    mutable std::mutex cache_mutex_;
    mutable std::list<Index> lru_;
    mutable std::unordered_map<Index, std::pair<std::shared_ptr<const Eigen::VectorXd>,
                                                std::list<Index>::iterator>>
        rows_;
};

std::shared_ptr<const KernelMatrix> compute_kernel_matrix(
    std::shared_ptr<const FeatureMatrix> features, const KernelConfig& config,
    std::size_t memory_budget = KernelMatrix::kDefaultMemoryBudget);

}  // namespace ital
