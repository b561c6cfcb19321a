#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "ital/gp.hpp"
#include "ital/mutual_information.hpp"
#include "ital/user_model.hpp"

namespace ital {

struct SelectionOptions {
    MutualInformationOptions mi;
    /// Score a random subset of this many unlabeled samples; 0 scores all.
    std::size_t pool_size = 0;
    std::uint64_t seed = 0;
    /// Threads for candidate scoring; 0 uses the hardware concurrency.
    std::size_t workers = 0;
};

/// Objective of a candidate batch given its joint predictive distribution.
using BatchObjective = std::function<double(const RelevanceDistribution&)>;

/// Grows a batch one sample at a time, each step adding the candidate whose
/// extended batch maximizes `objective`. Candidates of one step are scored in
/// parallel; the maximum is taken sequentially with ties going to the lowest
/// dataset index, so the result does not depend on the thread count.
CandidateBatch greedy_batch(const PoolPosterior& pool, std::size_t k, const BatchObjective& objective,
                            std::size_t workers);

/// Validated candidate pool: sorted, distinct, unlabeled, in range, and
/// sub-sampled to pool_size when requested.
IdList candidate_pool(const GPState& state, const KernelMatrix& kernel, std::span<const Index> unlabeled_ids,
                      std::size_t pool_size, std::uint64_t seed);

/// Greedy maximization of the approximate mutual information. Returns
/// min(k, |unlabeled|) ids; an empty pool gives an empty batch with criterion 0.
CandidateBatch select_batch_greedy(const GPState& state, const KernelMatrix& kernel,
                                   std::span<const Index> unlabeled_ids, std::size_t k,
                                   const UserModelParams& params, const SelectionOptions& options = {});

}  // namespace ital
