#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ital/features.hpp"
#include "ital/gp.hpp"
#include "ital/selection.hpp"
#include "ital/user_model.hpp"

namespace ital {

enum class StrategyId { random, topscoring, var, border, border_div, unc, emoc, sud, tcal, rbmal, entropy, ital };

/// Throws ConfigError for unknown names.
StrategyId parse_strategy(std::string_view name);
std::string to_string(StrategyId id);
const std::vector<StrategyId>& all_strategies();

/// Strategies that rank candidates by an independent per-sample score.
bool is_pointwise(StrategyId id);

/// Knobs of the baselines whose original authors' defaults are not known here.
struct StrategyParams {
    double border_div_lambda = 0.5;
    std::size_t sud_neighbors = 10;
    double tcal_fraction = 0.25;
    std::size_t tcal_iterations = 100;
    double rbmal_beta = 0.5;

    void validate() const;
};

/// Read-only inputs shared by all strategies for one selection call.
struct StrategyContext {
    const GPState& state;
    const KernelMatrix& kernel;
    const FeatureIndex& features;
    UserModelParams user{};
    SelectionOptions selection{};
    StrategyParams params{};
    std::uint64_t seed = 0;
};

/// Per-candidate scores (higher is better), aligned with `candidates`.
/// Only valid for pointwise strategies; others raise ContractError.
Eigen::VectorXd score_candidates(StrategyId strategy, const StrategyContext& ctx,
                                 std::span<const Index> candidates);

/// Batch selection for every strategy except ital. Returns min(k, m) distinct ids.
CandidateBatch select_batch_heuristic(StrategyId strategy, const StrategyContext& ctx,
                                      std::span<const Index> unlabeled_ids, std::size_t k);

/// Dispatches to select_batch_greedy for ital and to select_batch_heuristic otherwise.
CandidateBatch select_batch(StrategyId strategy, const StrategyContext& ctx,
                            std::span<const Index> unlabeled_ids, std::size_t k);

}  // namespace ital
