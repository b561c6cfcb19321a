#include "ital/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace ital {

double average_precision(std::span<const double> scores, std::span<const char> relevant) {
    if (scores.size() != relevant.size()) {
        throw ContractError("average_precision: scores and relevance differ in length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (relevant[order[rank]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    if (hits == 0) {
        throw ContractError("average_precision: no relevant sample in the evaluation set");
    }
    return sum / static_cast<double>(hits);
}

LearningCurve make_learning_curve(std::vector<double> ap) {
    LearningCurve c;
    c.ap_by_round = std::move(ap);
    if (c.ap_by_round.size() <= 1) {
        c.aulc = c.ap_by_round.empty() ? 0.0 : c.ap_by_round.front();
        c.aulc_defined = false;
        return c;
    }
    c.aulc = std::accumulate(c.ap_by_round.begin() + 1, c.ap_by_round.end(), 0.0) /
             static_cast<double>(c.ap_by_round.size() - 1);
    c.aulc_defined = true;
    return c;
}

std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves) {
    if (curves.empty()) {
        return {};
    }
    std::vector<double> out(curves.front().size(), 0.0);
    for (const auto& c : curves) {
        if (c.size() != out.size()) {
            throw ContractError("mean_curve: curves differ in length");
        }
        for (std::size_t i = 0; i < c.size(); ++i) {
            out[i] += c[i];
        }
    }
    for (auto& v : out) {
        v /= static_cast<double>(curves.size());
    }
    return out;
}

std::vector<std::size_t> descending_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<std::size_t> rank(values.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        // equal values share the better rank
        rank[order[r]] = r > 0 && values[order[r]] == values[order[r - 1]] ? rank[order[r - 1]] : r + 1;
    }
    return rank;
}

}  // namespace ital
