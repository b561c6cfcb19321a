#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "ital/common.hpp"

namespace ital {

/// Cosine geometry of the feature space, shared by the diversity-aware
/// baselines. Rows are normalized once; zero rows have similarity 0 to
/// everything (including themselves).
class FeatureIndex {
public:
    explicit FeatureIndex(std::shared_ptr<const FeatureMatrix> features);

    Index size() const { return static_cast<Index>(unit_.rows()); }
    const FeatureMatrix& features() const { return *features_; }

    double cosine(Index a, Index b) const;

    /// Mean cosine similarity of every sample to its `neighbors` most similar
    /// other samples in the whole dataset. Computed on first use per
    /// neighbor count and cached.
    const Eigen::VectorXd& density(std::size_t neighbors, std::size_t workers = 0) const;

private:
    std::shared_ptr<const FeatureMatrix> features_;
    FeatureMatrix unit_;
    std::vector<char> zero_;

    mutable std::mutex mutex_;
    mutable std::vector<std::pair<std::size_t, std::shared_ptr<Eigen::VectorXd>>> density_;
};

}  // namespace ital
