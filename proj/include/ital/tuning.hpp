#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ital/dataset.hpp"
#include "ital/kernel.hpp"

namespace ital {

struct TuningGrid {
    std::vector<double> sigma_ls;
    std::vector<double> sigma_var;
    std::vector<double> sigma_noise;

    void validate() const;
};

/// Log-spaced grid; length scales are multiples of the median pairwise
/// distance of a training subsample.
TuningGrid default_grid(const Dataset& ds, std::uint64_t seed = 0);

struct TuningOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    /// Training samples used for cross-validation (seeded subsample).
    std::size_t max_samples = 1000;
    std::size_t max_sweeps = 5;
};

struct TuningResult {
    KernelConfig best;
    double score = 0.0;
    std::vector<std::pair<KernelConfig, double>> visited;
    std::size_t folds = 0;
    std::vector<std::string> warnings;
};

/// Cross-validated retrieval quality of a kernel on the training split: for
/// every fold a one-vs-rest GP is fitted on the remaining folds and the
/// held-out samples are ranked per class by predictive mean; the result is
/// the mean AP over (fold, class) pairs with a relevant held-out sample.
class CrossValidation {
public:
    CrossValidation(const Dataset& ds, const TuningOptions& options);

    double objective(const KernelConfig& config) const;
    std::size_t folds() const { return folds_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::shared_ptr<const FeatureMatrix> features_;
    std::vector<std::size_t> fold_;
    Eigen::MatrixXd targets_;  // +-1, samples x classes
    std::size_t folds_ = 0;
    std::vector<std::string> warnings_;
};

/// Alternating coordinate ascent over (sigma_ls, sigma_var, sigma_noise) on
/// the grid, starting from the middle of each axis. Returns the best visited
/// configuration.
TuningResult tune_kernel(const Dataset& ds, const TuningGrid& grid, const TuningOptions& options = {});

}  // namespace ital
