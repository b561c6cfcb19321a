#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ital/dataset.hpp"
#include "ital/features.hpp"
#include "ital/kernel.hpp"
#include "ital/metrics.hpp"
#include "ital/strategies.hpp"
#include "ital/user_model.hpp"

namespace ital {

/// How the simulated annotator actually behaves (as opposed to what the
/// selection criterion assumes about it).
struct UserBehavior {
    double p_label = 1.0;
    double p_mistake = 0.0;
    /// Candidates carrying the target only as a wide-sense label are skipped.
    bool respect_unnameable = true;

    void validate() const;
};

struct RetrievalTask {
    IdList query_ids;
    IdList negative_ids;
    std::string relevant_label;
    std::size_t rounds = 10;
    std::size_t batch_size = 4;
};

/// True relevance of sample i for the task label (+1 / -1).
int true_relevance(const Dataset& ds, Index i, const std::string& label);

/// Answers for a batch. Each entry draws from its own generator keyed by
/// (seed, round, candidate id), so answers do not depend on batch order.
FeedbackVector simulate_user(const CandidateBatch& batch, const RetrievalTask& task, const Dataset& ds,
                             const UserBehavior& behavior, std::uint64_t seed, std::size_t round);

/// queries_per_class single-positive tasks per label, queries drawn from the
/// training samples of that label without replacement. Labels without relevant
/// test samples are skipped. Task order: labels sorted, then draw order.
std::vector<RetrievalTask> make_tasks(const Dataset& ds, std::size_t queries_per_class, std::size_t rounds,
                                      std::size_t batch_size, std::uint64_t seed);

struct RunConfig {
    StrategyId strategy = StrategyId::ital;
    UserModelParams user_model{};
    UserBehavior behavior{};
    StrategyParams params{};
    SelectionOptions selection{};
    std::uint64_t seed = 0;
    /// When false, feedback is collected but never fed into the model.
    bool update_model = true;
};

/// Context shared by all tasks on one dataset.
struct Workbench {
    const Dataset& dataset;
    const KernelMatrix& kernel;
    const FeatureIndex& features;
};

/// Feedback loop of one task: select, simulate, update, evaluate AP on test.
LearningCurve run_retrieval_task(const Workbench& wb, const RetrievalTask& task, const RunConfig& config);

/// AP of the test split ranked by the predictive mean of `state`.
double evaluate_test_ap(const Workbench& wb, const GPState& state, const std::string& label);

}  // namespace ital
