#pragma once

#include <span>
#include <vector>

#include "ital/common.hpp"

namespace ital {

/// Average precision of the ranking `scores` (descending) against binary
/// relevance. Equal scores are ordered by position, so callers pass samples in
/// ascending id order. Throws ContractError when nothing is relevant.
double average_precision(std::span<const double> scores, std::span<const char> relevant);

struct LearningCurve {
    /// Round 0 is before any feedback; round t after the t-th feedback.
    std::vector<double> ap_by_round;
    double aulc = 0.0;
    /// False for a curve without feedback rounds; aulc then holds the round-0 AP.
    bool aulc_defined = false;

    std::size_t rounds() const { return ap_by_round.empty() ? 0 : ap_by_round.size() - 1; }
};

/// Mean of ap[1..T]; for T = 0 the round-0 AP with aulc_defined = false.
LearningCurve make_learning_curve(std::vector<double> ap_by_round);

/// Pointwise mean of equally long curves.
std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves);

/// Ranks of `values`, 1 for the largest; equal values share the better rank.
std::vector<std::size_t> descending_ranks(std::span<const double> values);

}  // namespace ital
