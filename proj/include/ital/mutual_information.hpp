#pragma once

#include <span>
#include <vector>

#include "ital/gp.hpp"
#include "ital/kernel.hpp"
#include "ital/mvn.hpp"
#include "ital/user_model.hpp"

namespace ital {

struct MutualInformationOptions {
    OrthantOptions orthant;
    /// Terms with P(f | r) below this are skipped.
    double prune = 1e-12;
    /// Probabilities are clamped to [floor, 1] before taking logarithms.
    double floor = 1e-12;
};

/// Posterior over the batch relevance after observing one feedback vector.
struct FeedbackPosterior {
    FeedbackVector feedback;
    double probability = 0.0;       // P(F_u = f)
    std::vector<double> posterior;  // P(R_u = r | F_u = f), indexed by mask
};

/// Everything the criterion is built from, exposed for inspection.
struct InformationTerms {
    std::vector<double> prior;  // P(R_u = r), normalized orthant table
    double entropy = 0.0;       // H(R_u)
    double mutual_information = 0.0;
    std::vector<FeedbackPosterior> feedbacks;  // only filled on request
};

/// Mutual information between the batch relevance R_u and the feedback F_u,
/// given the joint predictive distribution of the batch.
///
/// P(R_u = r | F_u = f) comes from the GP updated with the nonzero entries of f
/// as labels, even when the user model allows mistakes. Labeled entries are
/// known exactly after the update, so r must agree with f on them. Natural
/// logarithm; the constant 2^(n-k) is dropped.
double mutual_information(const RelevanceDistribution& batch, const UserModelParams& params,
                          const MutualInformationOptions& options = {});

InformationTerms information_terms(const RelevanceDistribution& batch, const UserModelParams& params,
                                   const MutualInformationOptions& options = {},
                                   bool keep_feedbacks = false);

/// gp_predict on the batch followed by mutual_information. Batch ids must be
/// distinct and unlabeled.
double approximate_mutual_information(const GPState& state, const KernelMatrix& kernel,
                                      std::span<const Index> batch_ids, const UserModelParams& params,
                                      const MutualInformationOptions& options = {});

/// Joint entropy H(R_u) of the batch relevance from the normalized orthant table.
double joint_entropy(const RelevanceDistribution& batch, const OrthantOptions& options = {},
                     double floor = 1e-12);

}  // namespace ital
