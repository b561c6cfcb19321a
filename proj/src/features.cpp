#include "ital/features.hpp"

#include <algorithm>
#include <functional>

#include "ital/parallel.hpp"

namespace ital {

FeatureIndex::FeatureIndex(std::shared_ptr<const FeatureMatrix> features) : features_(std::move(features)) {
    if (!features_) {
        throw ContractError("feature index: no features");
    }
    unit_ = *features_;
    zero_.assign(static_cast<std::size_t>(unit_.rows()), 0);
    for (Eigen::Index r = 0; r < unit_.rows(); ++r) {
        const double norm = unit_.row(r).norm();
        if (norm > 0.0) {
            unit_.row(r) /= norm;
        } else {
            zero_[static_cast<std::size_t>(r)] = 1;
        }
    }
}

double FeatureIndex::cosine(Index a, Index b) const {
    if (zero_[a] || zero_[b]) {
        return 0.0;
    }
    return unit_.row(static_cast<Eigen::Index>(a)).dot(unit_.row(static_cast<Eigen::Index>(b)));
}

const Eigen::VectorXd& FeatureIndex::density(std::size_t neighbors, std::size_t workers) const {
    std::lock_guard lock(mutex_);
    for (const auto& [kappa, values] : density_) {
        if (kappa == neighbors) {
            return *values;
        }
    }
    const Index n = size();
    auto values = std::make_shared<Eigen::VectorXd>(static_cast<Eigen::Index>(n));
    const std::size_t kappa = std::min<std::size_t>(neighbors, n > 0 ? n - 1 : 0);
    if (workers == 0) {
        workers = default_workers();
    }
    parallel_for(n, workers, [&](std::size_t i) {
        if (kappa == 0) {
            (*values)(static_cast<Eigen::Index>(i)) = 0.0;
            return;
        }
        std::vector<double> sims;
        sims.reserve(n - 1);
        for (Index j = 0; j < n; ++j) {
            if (j != i) {
                sims.push_back(cosine(i, j));
            }
        }
        std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kappa - 1), sims.end(),
                         std::greater<>());
        double s = 0.0;
        for (std::size_t t = 0; t < kappa; ++t) {
            s += sims[t];
        }
        (*values)(static_cast<Eigen::Index>(i)) = s / static_cast<double>(kappa);
    });
    density_.emplace_back(neighbors, values);
    return *values;
}

}  // namespace ital
