#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ital/common.hpp"
#include "ital/gp.hpp"

namespace ital {

/// Sign assignment r in {-1, +1}^k. Bit i of mask() is set iff r_i = +1.
class RelevanceConfig {
public:
    explicit RelevanceConfig(std::vector<int> signs);
    static RelevanceConfig from_mask(std::uint32_t mask, std::size_t k);

    std::size_t size() const { return signs_.size(); }
    int operator[](std::size_t i) const { return signs_[i]; }
    std::span<const int> signs() const { return signs_; }
    std::uint32_t mask() const;

private:
    std::vector<int> signs_;
};

struct OrthantEstimate {
    double probability = 0.0;
    /// Three standard errors across the random shifts; 0 for closed-form cases.
    double error_estimate = 0.0;
    /// False when the sample cap was hit before reaching the tolerance.
    bool converged = true;
    std::size_t points = 0;
};

struct OrthantOptions {
    double tolerance = 1e-4;
    std::size_t max_points = 200000;
    std::size_t shifts = 8;
    std::uint64_t seed = 0x5eed17a1ULL;
    std::size_t max_dimension = 10;
};

/// Orthant probabilities of all 2^k relevance configurations of one Gaussian,
/// indexed by RelevanceConfig::mask().
class OrthantTable {
public:
    OrthantTable() = default;
    OrthantTable(std::size_t dimension, std::vector<OrthantEstimate> entries);

    std::size_t dimension() const { return dim_; }
    std::size_t count() const { return entries_.size(); }
    const OrthantEstimate& operator[](std::uint32_t mask) const { return entries_[mask]; }
    const OrthantEstimate& at(const RelevanceConfig& r) const;
    const std::vector<OrthantEstimate>& entries() const { return entries_; }

    double sum() const;
    /// Probabilities rescaled to sum exactly to one.
    std::vector<double> normalized() const;
    double max_error() const;

private:
    std::size_t dim_ = 0;
    std::vector<OrthantEstimate> entries_;
};

/// P(sign(y_i) = signs_i for all i) for y ~ dist. Zero-variance dimensions are
/// deterministic: they contribute 1 if sign(mean_i) matches (mean 0 counts as
/// negative) and 0 otherwise. Throws ContractError on dimension mismatch and
/// NumericalError if the covariance is not positive semi-definite.
OrthantEstimate orthant_probability(const RelevanceDistribution& dist, const RelevanceConfig& config,
                                    const OrthantOptions& options = {});

/// All 2^k orthants from a single factorization and a single point set.
/// Throws CapacityError if k exceeds options.max_dimension.
OrthantTable orthant_probabilities_all(const RelevanceDistribution& dist,
                                       const OrthantOptions& options = {});

OrthantEstimate orthant_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                    const RelevanceConfig& config, const OrthantOptions& options = {});
OrthantTable orthant_probabilities_all(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       const OrthantOptions& options = {});

double normal_cdf(double x);
double normal_quantile(double p);

/// P(X > h, Y > k) for standard bivariate normal with correlation rho.
double bivariate_normal_upper(double h, double k, double rho);

/// Natural-log entropy of a discrete distribution.
double entropy(std::span<const double> probabilities, double floor = 1e-12);

}  // namespace ital
