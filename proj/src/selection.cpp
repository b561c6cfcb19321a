#include "ital/selection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "ital/parallel.hpp"
#include "ital/random.hpp"

namespace ital {

IdList candidate_pool(const GPState& state, const KernelMatrix& kernel, std::span<const Index> unlabeled_ids,
                      std::size_t pool_size, std::uint64_t seed) {
    IdList pool(unlabeled_ids.begin(), unlabeled_ids.end());
    std::sort(pool.begin(), pool.end());
    if (std::adjacent_find(pool.begin(), pool.end()) != pool.end()) {
        throw ContractError("selection: unlabeled ids must be distinct");
    }
    for (const Index id : pool) {
        if (id >= kernel.size()) {
            throw ContractError("selection: candidate id out of range");
        }
        if (state.contains(id)) {
            std::ostringstream msg;
            msg << "selection: candidate " << id << " is already labeled";
            throw ContractError(msg.str());
        }
    }
    if (pool_size > 0 && pool_size < pool.size()) {
        Rng rng(derive_seed(seed, {0x9001}));
        // Partial Fisher-Yates with our own uniform draws: identical on every platform.
        for (std::size_t i = 0; i < pool_size; ++i) {
            const auto span = pool.size() - i;
            const auto j = i + std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span)));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(pool_size);
        std::sort(pool.begin(), pool.end());
    }
    return pool;
}

CandidateBatch greedy_batch(const PoolPosterior& pool, std::size_t k, const BatchObjective& objective,
                            std::size_t workers) {
    CandidateBatch out;
    const std::size_t m = pool.size();
    k = std::min(k, m);
    if (k == 0) {
        return out;
    }
    if (workers == 0) {
        workers = default_workers();
    }
    std::vector<std::size_t> chosen;  // pool positions
    std::vector<char> taken(m, 0);
    std::vector<double> score(m);
    chosen.reserve(k);
    for (std::size_t step = 0; step < k; ++step) {
        parallel_for(m, workers, [&](std::size_t c) {
            if (taken[c]) {
                score[c] = -std::numeric_limits<double>::infinity();
                return;
            }
            std::vector<std::size_t> positions = chosen;
            positions.push_back(c);
            score[c] = objective(pool.joint(positions));
        });
        // Pool ids are sorted, so the first maximum is the lowest dataset index.
        std::size_t best = m;
        for (std::size_t c = 0; c < m; ++c) {
            if (taken[c]) {
                continue;
            }
            if (best == m || score[c] > score[best]) {
                best = c;
            }
        }
        taken[best] = 1;
        chosen.push_back(best);
        out.ids.push_back(pool.ids()[best]);
        out.criterion_value = score[best];
    }
    return out;
}

CandidateBatch select_batch_greedy(const GPState& state, const KernelMatrix& kernel,
                                   std::span<const Index> unlabeled_ids, std::size_t k,
                                   const UserModelParams& params, const SelectionOptions& options) {
    params.validate();
    if (k == 0) {
        throw ContractError("selection: batch size must be at least 1");
    }
    IdList pool_ids = candidate_pool(state, kernel, unlabeled_ids, options.pool_size, options.seed);
    if (pool_ids.empty()) {
        return {};
    }
    const PoolPosterior pool(state, kernel, std::move(pool_ids));
    const auto mi_options = options.mi;
    return greedy_batch(
        pool, k,
        [&](const RelevanceDistribution& d) { return mutual_information(d, params, mi_options); },
        options.workers);
}

}  // namespace ital
