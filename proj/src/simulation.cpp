#include "ital/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ital/random.hpp"

namespace ital {

void UserBehavior::validate() const {
    if (!(p_label >= 0.0 && p_label <= 1.0) || !(p_mistake >= 0.0 && p_mistake <= 1.0)) {
        throw ConfigError("user behavior: probabilities must lie in [0, 1]");
    }
}

int true_relevance(const Dataset& ds, Index i, const std::string& label) {
    return ds.has_label(i, label) ? 1 : -1;
}

FeedbackVector simulate_user(const CandidateBatch& batch, const RetrievalTask& task, const Dataset& ds,
                             const UserBehavior& behavior, std::uint64_t seed, std::size_t round) {
    behavior.validate();
    FeedbackVector f(batch.ids.size(), 0);
    for (std::size_t i = 0; i < batch.ids.size(); ++i) {
        const Index id = batch.ids[i];
        if (behavior.respect_unnameable && ds.wide_sense_only(id, task.relevant_label)) {
            continue;
        }
        Rng rng(derive_seed(seed, {0xfeed, round, id}));
        const double u_label = uniform01(rng);
        const double u_mistake = uniform01(rng);
        if (u_label >= behavior.p_label) {
            continue;
        }
        const int truth = true_relevance(ds, id, task.relevant_label);
        f[i] = u_mistake < behavior.p_mistake ? -truth : truth;
    }
    return f;
}

std::vector<RetrievalTask> make_tasks(const Dataset& ds, std::size_t queries_per_class, std::size_t rounds,
                                      std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) {
        throw ConfigError("tasks: batch size must be at least 1");
    }
    std::vector<RetrievalTask> tasks;
    const IdList train = ds.train_ids();
    const IdList test = ds.test_ids();
    for (const auto& label : ds.vocabulary()) {
        const bool evaluable =
            std::any_of(test.begin(), test.end(), [&](Index i) { return ds.has_label(i, label); });
        if (!evaluable) {
            continue;
        }
        IdList candidates;
        for (const Index i : train) {
            if (ds.has_label(i, label)) {
                candidates.push_back(i);
            }
        }
        Rng rng(derive_seed(seed, {0x7a5c, fnv1a(label)}));
        const std::size_t take = std::min(queries_per_class, candidates.size());
        for (std::size_t q = 0; q < take; ++q) {
            const std::size_t span = candidates.size() - q;
            const std::size_t j = q + std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span)));
            std::swap(candidates[q], candidates[j]);
            RetrievalTask t;
            t.query_ids = {candidates[q]};
            t.relevant_label = label;
            t.rounds = rounds;
            t.batch_size = batch_size;
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

double evaluate_test_ap(const Workbench& wb, const GPState& state, const std::string& label) {
    const IdList test = wb.dataset.test_ids();
    const Eigen::VectorXd mean = gp_predict_mean(state, wb.kernel, test);
    std::vector<double> scores(mean.data(), mean.data() + mean.size());
    std::vector<char> relevant(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        relevant[i] = wb.dataset.has_label(test[i], label) ? 1 : 0;
    }
    return average_precision(scores, relevant);
}

LearningCurve run_retrieval_task(const Workbench& wb, const RetrievalTask& task, const RunConfig& cfg) {
    const Dataset& ds = wb.dataset;
    if (task.query_ids.empty()) {
        throw ContractError("task: at least one query sample is required");
    }
    if (task.batch_size == 0) {
        throw ContractError("task: batch size must be at least 1");
    }
    IdList ids;
    std::vector<int> labels;
    for (const Index q : task.query_ids) {
        if (q >= ds.size() || !ds.has_label(q, task.relevant_label)) {
            throw ContractError("task: query samples must carry the relevant label");
        }
        ids.push_back(q);
        labels.push_back(1);
    }
    for (const Index q : task.negative_ids) {
        ids.push_back(q);
        labels.push_back(-1);
    }
    GPState state = gp_fit(wb.kernel, ids, labels);
    // Each candidate is shown at most once, labeled or skipped.
    std::set<Index> shown(ids.begin(), ids.end());

    std::vector<double> ap;
    ap.push_back(evaluate_test_ap(wb, state, task.relevant_label));
    for (std::size_t round = 1; round <= task.rounds; ++round) {
        try {
            IdList pool;
            for (const Index i : ds.train_ids()) {
                if (!shown.count(i)) {
                    pool.push_back(i);
                }
            }
            SelectionOptions sel = cfg.selection;
            sel.seed = derive_seed(cfg.seed, {0x5e1, round});
            const StrategyContext ctx{state, wb.kernel, wb.features, cfg.user_model, sel, cfg.params,
                                      derive_seed(cfg.seed, {0x57a, round})};
            const CandidateBatch batch = select_batch(cfg.strategy, ctx, pool, task.batch_size);
            const FeedbackVector f = simulate_user(batch, task, ds, cfg.behavior, cfg.seed, round);
            IdList new_ids;
            std::vector<int> new_labels;
            for (std::size_t i = 0; i < batch.ids.size(); ++i) {
                shown.insert(batch.ids[i]);
                if (f[i] != 0) {
                    new_ids.push_back(batch.ids[i]);
                    new_labels.push_back(f[i]);
                }
            }
            if (cfg.update_model) {
                state = gp_update(state, wb.kernel, new_ids, new_labels);
            }
            ap.push_back(evaluate_test_ap(wb, state, task.relevant_label));
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "round " << round << " (" << to_string(cfg.strategy) << ", label " << task.relevant_label
                << "): " << e.what();
            throw Error(msg.str());
        }
    }
    return make_learning_curve(std::move(ap));
}

}  // namespace ital
