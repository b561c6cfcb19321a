#pragma once

#include <span>
#include <vector>

#include "ital/common.hpp"
#include "ital/mvn.hpp"

namespace ital {

/// Probabilistic model of the annotator: an entry is labeled with probability
/// p_label and, if labeled, gets the wrong sign with probability p_mistake.
struct UserModelParams {
    double p_label = 1.0;
    double p_mistake = 0.0;

    bool is_perfect() const { return p_label == 1.0 && p_mistake == 0.0; }
    /// Throws ConfigError unless p_label in [0, 1] and p_mistake in [0, 1).
    void validate() const;

    friend bool operator==(const UserModelParams&, const UserModelParams&) = default;
};

/// Answers aligned with a candidate batch: +1 relevant, -1 irrelevant, 0 skipped.
using FeedbackVector = std::vector<int>;

struct CandidateBatch {
    IdList ids;
    /// Criterion of the final batch (MI for ital, joint entropy for entropy, ...).
    /// Only comparable between batches of equal size.
    double criterion_value = 0.0;
};

/// P(F_i = f | R_i = r) for one batch entry.
double feedback_probability(int f, int r, const UserModelParams& params);

/// Product of the per-entry probabilities; f and r must have equal length.
double feedback_probability(std::span<const int> f, const RelevanceConfig& r, const UserModelParams& params);

}  // namespace ital
