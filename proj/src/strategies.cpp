#include "ital/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "ital/mvn.hpp"
#include "ital/parallel.hpp"
#include "ital/random.hpp"

namespace ital {
namespace {

constexpr std::array<std::pair<StrategyId, std::string_view>, 12> kNames{{
    {StrategyId::random, "random"},
    {StrategyId::topscoring, "topscoring"},
    {StrategyId::var, "var"},
    {StrategyId::border, "border"},
    {StrategyId::border_div, "border_div"},
    {StrategyId::unc, "unc"},
    {StrategyId::emoc, "emoc"},
    {StrategyId::sud, "sud"},
    {StrategyId::tcal, "tcal"},
    {StrategyId::rbmal, "rbmal"},
    {StrategyId::entropy, "entropy"},
    {StrategyId::ital, "ital"},
}};

constexpr double kTiny = 1e-12;

std::size_t workers_of(const StrategyContext& ctx) {
    return ctx.selection.workers == 0 ? default_workers() : ctx.selection.workers;
}

double prob_relevant(double mean, double sd) {
    if (sd < kTiny) {
        return mean > 0.0 ? 1.0 : 0.0;
    }
    return normal_cdf(mean / sd);
}

double binary_entropy(double p) {
    double h = 0.0;
    if (p > 0.0) {
        h -= p * std::log(p);
    }
    if (p < 1.0) {
        h -= (1.0 - p) * std::log(1.0 - p);
    }
    return h;
}

/// Positions sorted by score descending, ties by position (pools are sorted by id).
std::vector<std::size_t> ranking(const Eigen::VectorXd& score) {
    std::vector<std::size_t> order(static_cast<std::size_t>(score.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return score(static_cast<Eigen::Index>(a)) > score(static_cast<Eigen::Index>(b));
    });
    return order;
}

CandidateBatch top_k(const Eigen::VectorXd& score, std::span<const Index> pool, std::size_t k) {
    CandidateBatch out;
    const auto order = ranking(score);
    k = std::min(k, order.size());
    for (std::size_t t = 0; t < k; ++t) {
        out.ids.push_back(pool[order[t]]);
        out.criterion_value += score(static_cast<Eigen::Index>(order[t]));
    }
    return out;
}

Eigen::VectorXd emoc_scores(const StrategyContext& ctx, std::span<const Index> cand, const MarginalPrediction& mp) {
    const auto m = static_cast<Eigen::Index>(cand.size());
    const Index n = ctx.kernel.size();
    const auto& labeled = ctx.state.labeled_ids();
    Eigen::MatrixXd V;  // A K_{L,cand}
    if (!ctx.state.empty()) {
        V = ctx.state.inverse_gram() * ctx.kernel.block(labeled, cand);
    }
    // Sum over the whole dataset of |posterior covariance(x, candidate)|, in row blocks.
    constexpr Index block = 256;
    const std::size_t blocks = (n + block - 1) / block;
    std::vector<Eigen::VectorXd> partial(blocks, Eigen::VectorXd::Zero(m));
    parallel_for(blocks, workers_of(ctx), [&](std::size_t b) {
        IdList rows;
        for (Index x = b * block; x < std::min<Index>(n, (b + 1) * block); ++x) {
            rows.push_back(x);
        }
        Eigen::MatrixXd C = ctx.kernel.block(rows, cand);
        if (!ctx.state.empty()) {
            C -= ctx.kernel.block(labeled, rows).transpose() * V;
        }
        partial[b] = C.cwiseAbs().colwise().sum().transpose();
    });
    Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
    for (const auto& p : partial) {
        total += p;
    }
    Eigen::VectorXd score(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double mu = mp.mean(i);
        const double var = mp.variance(i);
        if (var < kTiny) {
            score(i) = 0.0;
            continue;
        }
        const double p = prob_relevant(mu, std::sqrt(var));
        // Updating with label y moves every mean by cov(x, i) (y - mu_i) / var_i.
        const double expected_step = p * std::abs(1.0 - mu) + (1.0 - p) * std::abs(-1.0 - mu);
        score(i) = total(i) * expected_step / var;
    }
    return score;
}

CandidateBatch greedy_similarity(std::span<const Index> pool, std::size_t k, const Eigen::VectorXd& base,
                                 double similarity_weight, const FeatureIndex& fx) {
    // score = base - similarity_weight * max cosine to the already selected samples
    CandidateBatch out;
    const std::size_t m = pool.size();
    k = std::min(k, m);
    std::vector<double> max_sim(m, 0.0);
    std::vector<char> taken(m, 0);
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t best = m;
        double best_score = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            if (taken[c]) {
                continue;
            }
            const double s = base(static_cast<Eigen::Index>(c)) - similarity_weight * max_sim[c];
            if (best == m || s > best_score) {
                best = c;
                best_score = s;
            }
        }
        taken[best] = 1;
        out.ids.push_back(pool[best]);
        out.criterion_value = best_score;
        for (std::size_t c = 0; c < m; ++c) {
            if (!taken[c]) {
                max_sim[c] = std::max(max_sim[c], fx.cosine(pool[c], pool[best]));
            }
        }
    }
    return out;
}

CandidateBatch tcal(const StrategyContext& ctx, std::span<const Index> pool, std::size_t k,
                    const MarginalPrediction& mp) {
    const std::size_t m = pool.size();
    k = std::min(k, m);
    CandidateBatch out;
    if (k == 0) {
        return out;
    }
    // Most uncertain fraction of the pool.
    Eigen::VectorXd margin = -mp.mean.cwiseAbs();
    const auto order = ranking(margin);
    const auto subset_size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(ctx.params.tcal_fraction * static_cast<double>(m))), k, m);
    std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(subset_size));
    std::sort(subset.begin(), subset.end());

    const auto& X = ctx.features.features();
    const auto d = X.cols();
    auto point = [&](std::size_t s) { return X.row(static_cast<Eigen::Index>(pool[subset[s]])); };

    // k-means++ seeding.
    Rng rng(derive_seed(ctx.seed, {0x7ca1}));
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), d);
    std::vector<double> d2(subset_size, std::numeric_limits<double>::infinity());
    std::size_t first = std::min(subset_size - 1, static_cast<std::size_t>(uniform01(rng) * subset_size));
    centers.row(0) = point(first);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t s = 0; s < subset_size; ++s) {
            d2[s] = std::min(d2[s], (point(s) - centers.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
            total += d2[s];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = uniform01(rng) * total;
            for (pick = 0; pick + 1 < subset_size; ++pick) {
                u -= d2[pick];
                if (u < 0.0) {
                    break;
                }
            }
        } else {
            pick = c % subset_size;
        }
        centers.row(static_cast<Eigen::Index>(c)) = point(pick);
    }

    // Lloyd iterations.
    std::vector<std::size_t> assign(subset_size, 0);
    for (std::size_t it = 0; it < std::max<std::size_t>(1, ctx.params.tcal_iterations); ++it) {
        bool changed = it == 0;
        for (std::size_t s = 0; s < subset_size; ++s) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = (point(s) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (assign[s] != best) {
                assign[s] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t s = 0; s < subset_size; ++s) {
            sums.row(static_cast<Eigen::Index>(assign[s])) += point(s);
            ++counts[assign[s]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
            }
        }
    }

    // Medoid of each cluster: minimum average distance to the other members.
    struct Pick {
        std::size_t subset_pos;
        double margin;
    };
    std::vector<Pick> picks;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t s = 0; s < subset_size; ++s) {
            if (assign[s] == c) {
                members.push_back(s);
            }
        }
        if (members.empty()) {
            continue;
        }
        std::size_t best = members[0];
        double best_avg = std::numeric_limits<double>::infinity();
        for (const std::size_t a : members) {
            double sum = 0.0;
            for (const std::size_t b : members) {
                if (a != b) {
                    sum += (point(a) - point(b)).norm();
                }
            }
            const double avg = members.size() > 1 ? sum / static_cast<double>(members.size() - 1) : 0.0;
            if (avg < best_avg) {
                best_avg = avg;
                best = a;
            }
        }
        picks.push_back({best, std::abs(mp.mean(static_cast<Eigen::Index>(subset[best])))});
    }
    std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.margin < b.margin; });
    std::vector<char> used(m, 0);
    for (const auto& p : picks) {
        used[subset[p.subset_pos]] = 1;
        out.ids.push_back(pool[subset[p.subset_pos]]);
    }
    // Empty clusters leave gaps; fill them with the next most uncertain samples.
    for (std::size_t t = 0; out.ids.size() < k && t < order.size(); ++t) {
        if (!used[order[t]]) {
            used[order[t]] = 1;
            out.ids.push_back(pool[order[t]]);
        }
    }
    out.criterion_value = static_cast<double>(picks.size());
    return out;
}

}  // namespace

StrategyId parse_strategy(std::string_view name) {
    for (const auto& [id, n] : kNames) {
        if (n == name) {
            return id;
        }
    }
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::string to_string(StrategyId id) {
    for (const auto& [sid, n] : kNames) {
        if (sid == id) {
            return std::string(n);
        }
    }
    return "?";
}

const std::vector<StrategyId>& all_strategies() {
    static const std::vector<StrategyId> all = [] {
        std::vector<StrategyId> v;
        for (const auto& e : kNames) {
            v.push_back(e.first);
        }
        return v;
    }();
    return all;
}

bool is_pointwise(StrategyId id) {
    switch (id) {
        case StrategyId::random:
        case StrategyId::topscoring:
        case StrategyId::border:
        case StrategyId::unc:
        case StrategyId::sud:
        case StrategyId::emoc:
            return true;
        default:
            return false;
    }
}

void StrategyParams::validate() const {
    if (!(border_div_lambda >= 0.0 && border_div_lambda <= 1.0)) {
        throw ConfigError("border_div lambda must lie in [0, 1]");
    }
    if (sud_neighbors == 0) {
        throw ConfigError("sud neighbor count must be positive");
    }
    if (!(tcal_fraction > 0.0 && tcal_fraction <= 1.0)) {
        throw ConfigError("tcal fraction must lie in (0, 1]");
    }
    if (!(rbmal_beta >= 0.0 && rbmal_beta <= 1.0)) {
        throw ConfigError("rbmal beta must lie in [0, 1]");
    }
}

Eigen::VectorXd score_candidates(StrategyId strategy, const StrategyContext& ctx,
                                 std::span<const Index> cand) {
    if (!is_pointwise(strategy)) {
        throw ContractError("strategy '" + to_string(strategy) +
                            "' scores whole batches; use select_batch_heuristic");
    }
    const auto m = static_cast<Eigen::Index>(cand.size());
    Eigen::VectorXd score(m);
    if (strategy == StrategyId::random) {
        for (Eigen::Index i = 0; i < m; ++i) {
            Rng rng(derive_seed(ctx.seed, {0x5a4d, cand[static_cast<std::size_t>(i)]}));
            score(i) = uniform01(rng);
        }
        return score;
    }
    const MarginalPrediction mp = gp_predict_marginal(ctx.state, ctx.kernel, cand);
    switch (strategy) {
        case StrategyId::topscoring:
            return mp.mean;
        case StrategyId::border:
            return -mp.mean.cwiseAbs();
        case StrategyId::unc:
            for (Eigen::Index i = 0; i < m; ++i) {
                const double sd = std::sqrt(mp.variance(i));
                score(i) = sd < kTiny ? -std::numeric_limits<double>::infinity() : -std::abs(mp.mean(i)) / sd;
            }
            return score;
        case StrategyId::sud: {
            const auto& density = ctx.features.density(ctx.params.sud_neighbors, workers_of(ctx));
            for (Eigen::Index i = 0; i < m; ++i) {
                const double p = prob_relevant(mp.mean(i), std::sqrt(mp.variance(i)));
                score(i) = binary_entropy(p) * density(static_cast<Eigen::Index>(cand[static_cast<std::size_t>(i)]));
            }
            return score;
        }
        case StrategyId::emoc:
            return emoc_scores(ctx, cand, mp);
        default:
            break;
    }
    throw ContractError("unreachable strategy");
}

CandidateBatch select_batch_heuristic(StrategyId strategy, const StrategyContext& ctx,
                                      std::span<const Index> unlabeled_ids, std::size_t k) {
    if (strategy == StrategyId::ital) {
        throw ContractError("ital is selected by select_batch_greedy");
    }
    if (k == 0) {
        throw ContractError("selection: batch size must be at least 1");
    }
    ctx.params.validate();
    const IdList pool =
        candidate_pool(ctx.state, ctx.kernel, unlabeled_ids, ctx.selection.pool_size, ctx.selection.seed);
    if (pool.empty()) {
        return {};
    }
    if (is_pointwise(strategy)) {
        return top_k(score_candidates(strategy, ctx, pool), pool, k);
    }
    switch (strategy) {
        case StrategyId::var: {
            const PoolPosterior post(ctx.state, ctx.kernel, pool);
            return greedy_batch(
                post, k,
                [](const RelevanceDistribution& d) {
                    const double diag = d.cov.diagonal().sum();
                    return diag - (d.cov.sum() - diag);
                },
                workers_of(ctx));
        }
        case StrategyId::entropy: {
            const PoolPosterior post(ctx.state, ctx.kernel, pool);
            const auto opt = ctx.selection.mi;
            return greedy_batch(
                post, k, [&](const RelevanceDistribution& d) { return joint_entropy(d, opt.orthant, opt.floor); },
                workers_of(ctx));
        }
        case StrategyId::border_div: {
            const auto mean = gp_predict_mean(ctx.state, ctx.kernel, pool);
            const double lambda = ctx.params.border_div_lambda;
            return greedy_similarity(pool, k, -(1.0 - lambda) * mean.cwiseAbs(), lambda, ctx.features);
        }
        case StrategyId::rbmal: {
            const MarginalPrediction mp = gp_predict_marginal(ctx.state, ctx.kernel, pool);
            const double beta = ctx.params.rbmal_beta;
            Eigen::VectorXd base(mp.mean.size());
            for (Eigen::Index i = 0; i < base.size(); ++i) {
                const double p = prob_relevant(mp.mean(i), std::sqrt(mp.variance(i)));
                base(i) = beta * (1.0 - std::abs(2.0 * p - 1.0));
            }
            return greedy_similarity(pool, k, base, 1.0 - beta, ctx.features);
        }
        case StrategyId::tcal:
            return tcal(ctx, pool, k, gp_predict_marginal(ctx.state, ctx.kernel, pool));
        default:
            break;
    }
    throw ContractError("unreachable strategy");
}

CandidateBatch select_batch(StrategyId strategy, const StrategyContext& ctx,
                            std::span<const Index> unlabeled_ids, std::size_t k) {
    if (strategy == StrategyId::ital) {
        SelectionOptions opt = ctx.selection;
        if (opt.workers == 0) {
            opt.workers = default_workers();
        }
        return select_batch_greedy(ctx.state, ctx.kernel, unlabeled_ids, k, ctx.user, opt);
    }
    return select_batch_heuristic(strategy, ctx, unlabeled_ids, k);
}

}  // namespace ital
