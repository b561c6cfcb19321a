#pragma once

#include <span>

#include "ital/common.hpp"
#include "ital/kernel.hpp"

namespace ital {

/// Joint Gaussian prediction N(mean, cov) of the latent relevance of `ids`.
struct RelevanceDistribution {
    IdList ids;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
};

/// Gaussian-process regression fitted to labels in {-1, +1}. Immutable value:
/// gp_update returns a new state.
class GPState {
public:
    GPState() = default;

    const IdList& labeled_ids() const { return ids_; }
    const Eigen::VectorXd& labels() const { return labels_; }
    /// Inverse of the kernel restricted to the labeled samples.
    const Eigen::MatrixXd& inverse_gram() const { return inverse_; }
    /// inverse_gram * labels.
    const Eigen::VectorXd& weights() const { return weights_; }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    bool contains(Index id) const;

private:
    friend GPState gp_fit(const KernelMatrix&, std::span<const Index>, std::span<const int>);
    friend GPState gp_update(const GPState&, const KernelMatrix&, std::span<const Index>,
                             std::span<const int>);

    void index_ids();

    IdList ids_;
    IdList sorted_ids_;
    Eigen::VectorXd labels_;
    Eigen::MatrixXd inverse_;
    Eigen::VectorXd weights_;
};

/// Fits the GP on the labeled samples. The sub-kernel is inverted through a
/// Cholesky factorization; only if that fails is a jitter of 1e-8 sigma_var^2
/// added to the diagonal. Throws NumericalError naming the indices if the
/// jittered matrix is still not positive definite.
GPState gp_fit(const KernelMatrix& kernel, std::span<const Index> labeled_ids,
               std::span<const int> labels);

/// Predictive mean K_QL w and covariance K_QQ - K_QL A K_LQ, symmetrized. An
/// empty state yields the prior N(0, K_QQ).
RelevanceDistribution gp_predict(const GPState& state, const KernelMatrix& kernel,
                                 std::span<const Index> query_ids);

/// Extends the labeled set by blockwise inversion (Schur complement). Costs
/// O(l^2 k + k^3) for k new labels; an empty update returns the state unchanged.
GPState gp_update(const GPState& state, const KernelMatrix& kernel, std::span<const Index> new_ids,
                  std::span<const int> new_labels);

struct MarginalPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Mean and variance only; cheaper than gp_predict for large query sets.
MarginalPrediction gp_predict_marginal(const GPState& state, const KernelMatrix& kernel,
                                       std::span<const Index> query_ids);

Eigen::VectorXd gp_predict_mean(const GPState& state, const KernelMatrix& kernel,
                                std::span<const Index> query_ids);

/// Samples with predictive mean strictly above zero are relevant.
inline bool is_relevant(double predictive_mean) { return predictive_mean > 0.0; }

/// Posterior over a fixed candidate pool with cheap access to joint
/// predictions of small candidate subsets. Precomputes A K_{L,pool} once so a
/// joint prediction over b pool members costs O(b^2 l).
class PoolPosterior {
public:
    PoolPosterior(const GPState& state, const KernelMatrix& kernel, IdList pool);

    const IdList& ids() const { return pool_; }
    std::size_t size() const { return pool_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& variance() const { return variance_; }

    /// Posterior covariance between pool members a and b (positions in the pool).
    double covariance(std::size_t a, std::size_t b) const;

    /// Joint predictive distribution of the given pool positions.
    RelevanceDistribution joint(std::span<const std::size_t> positions) const;

    const KernelMatrix& kernel() const { return *kernel_; }

private:
    const KernelMatrix* kernel_;
    IdList pool_;
    Eigen::MatrixXd k_lp_;  // K_{L,pool}
    Eigen::MatrixXd v_;     // A K_{L,pool}
    Eigen::VectorXd mean_;
    Eigen::VectorXd variance_;
};

}  // namespace ital
