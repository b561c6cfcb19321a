#include "ital/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "ital/metrics.hpp"
#include "ital/random.hpp"

namespace ital {

void TuningGrid::validate() const {
    if (sigma_ls.empty() || sigma_var.empty() || sigma_noise.empty()) {
        throw ConfigError("tuning grid: every axis needs at least one value");
    }
    for (const double v : sigma_ls) {
        if (!(v > 0.0)) throw ConfigError("tuning grid: sigma_ls values must be positive");
    }
    for (const double v : sigma_var) {
        if (!(v > 0.0)) throw ConfigError("tuning grid: sigma_var values must be positive");
    }
    for (const double v : sigma_noise) {
        if (!(v >= 0.0)) throw ConfigError("tuning grid: sigma_noise values must be nonnegative");
    }
}

namespace {

IdList shuffled_train(const Dataset& ds, std::uint64_t seed, std::size_t limit) {
    IdList ids = ds.train_ids();
    Rng rng(derive_seed(seed, {0x70e}));
    for (std::size_t i = ids.size(); i > 1; --i) {
        const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)));
        std::swap(ids[i - 1], ids[j]);
    }
    if (ids.size() > limit) {
        ids.resize(limit);
    }
    return ids;
}

}  // namespace

TuningGrid default_grid(const Dataset& ds, std::uint64_t seed) {
    const IdList ids = shuffled_train(ds, seed, 300);
    std::vector<double> dist;
    const auto& X = *ds.features;
    for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
            dist.push_back((X.row(static_cast<Eigen::Index>(ids[a])) - X.row(static_cast<Eigen::Index>(ids[b]))).norm());
        }
    }
    double median = 1.0;
    if (!dist.empty()) {
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2), dist.end());
        median = std::max(dist[dist.size() / 2], 1e-6);
    }
    TuningGrid g;
    for (int e = -4; e <= 2; ++e) {
        g.sigma_ls.push_back(median * std::pow(2.0, e));
    }
    g.sigma_var = {0.25, 0.5, 1.0, 2.0, 4.0};
    g.sigma_noise = {0.01, 0.03, 0.1, 0.3, 1.0};
    return g;
}

CrossValidation::CrossValidation(const Dataset& ds, const TuningOptions& o) {
    const IdList ids = shuffled_train(ds, o.seed, std::max<std::size_t>(o.max_samples, 4));
    const std::size_t n = ids.size();
    if (n < 4) {
        throw ConfigError("tuning: need at least 4 training samples");
    }
    folds_ = std::max<std::size_t>(2, std::min(o.folds, n / 2));
    if (folds_ < o.folds) {
        std::ostringstream msg;
        msg << "reduced cross-validation from " << o.folds << " to " << folds_ << " folds for " << n << " samples";
        warnings_.push_back(msg.str());
    }
    auto X = std::make_shared<FeatureMatrix>(static_cast<Eigen::Index>(n), ds.features->cols());
    fold_.resize(n);
    const auto vocab = ds.vocabulary();
    targets_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t i = 0; i < n; ++i) {
        X->row(static_cast<Eigen::Index>(i)) = ds.features->row(static_cast<Eigen::Index>(ids[i]));
        fold_[i] = i % folds_;
        for (std::size_t c = 0; c < vocab.size(); ++c) {
            targets_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = ds.has_label(ids[i], vocab[c]) ? 1.0 : -1.0;
        }
    }
    features_ = std::move(X);
}

double CrossValidation::objective(const KernelConfig& config) const {
    const KernelMatrix K(features_, config);
    const std::size_t n = fold_.size();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < folds_; ++f) {
        IdList tr, te;
        for (std::size_t i = 0; i < n; ++i) {
            (fold_[i] == f ? te : tr).push_back(i);
        }
        const Eigen::MatrixXd Ktr = K.block(tr, tr);
        Eigen::LLT<Eigen::MatrixXd> llt(Ktr);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd J = Ktr;
            J.diagonal().array() += 1e-8 * config.prior_variance();
            llt.compute(J);
            if (llt.info() != Eigen::Success) {
                return 0.0;  // unusable configuration
            }
        }
        Eigen::MatrixXd Ytr(static_cast<Eigen::Index>(tr.size()), targets_.cols());
        for (std::size_t a = 0; a < tr.size(); ++a) {
            Ytr.row(static_cast<Eigen::Index>(a)) = targets_.row(static_cast<Eigen::Index>(tr[a]));
        }
        const Eigen::MatrixXd mean = K.block(te, tr) * llt.solve(Ytr);
        for (Eigen::Index c = 0; c < targets_.cols(); ++c) {
            std::vector<double> scores(te.size());
            std::vector<char> rel(te.size());
            bool any = false;
            for (std::size_t a = 0; a < te.size(); ++a) {
                scores[a] = mean(static_cast<Eigen::Index>(a), c);
                rel[a] = targets_(static_cast<Eigen::Index>(te[a]), c) > 0.0 ? 1 : 0;
                any = any || rel[a];
            }
            if (any) {
                sum += average_precision(scores, rel);
                ++count;
            }
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

TuningResult tune_kernel(const Dataset& ds, const TuningGrid& grid, const TuningOptions& options) {
    grid.validate();
    const CrossValidation cv(ds, options);
    TuningResult res;
    res.folds = cv.folds();
    res.warnings = cv.warnings();

    using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
    std::map<Key, double> cache;
    auto config_of = [&](const Key& k) {
        return KernelConfig{grid.sigma_var[std::get<1>(k)], grid.sigma_ls[std::get<0>(k)], grid.sigma_noise[std::get<2>(k)]};
    };
    auto eval = [&](const Key& k) {
        auto it = cache.find(k);
        if (it != cache.end()) {
            return it->second;
        }
        const KernelConfig c = config_of(k);
        const double v = cv.objective(c);
        cache.emplace(k, v);
        res.visited.emplace_back(c, v);
        return v;
    };

    Key cur{grid.sigma_ls.size() / 2, grid.sigma_var.size() / 2, grid.sigma_noise.size() / 2};
    double cur_v = eval(cur);
    for (std::size_t sweep = 0; sweep < std::max<std::size_t>(options.max_sweeps, 1); ++sweep) {
        bool moved = false;
        for (int axis = 0; axis < 3; ++axis) {
            const std::size_t len = axis == 0 ? grid.sigma_ls.size() : axis == 1 ? grid.sigma_var.size() : grid.sigma_noise.size();
            for (std::size_t v = 0; v < len; ++v) {
                Key k = cur;
                (axis == 0 ? std::get<0>(k) : axis == 1 ? std::get<1>(k) : std::get<2>(k)) = v;
                const double val = eval(k);
                if (val > cur_v) {
                    cur_v = val;
                    cur = k;
                    moved = true;
                }
            }
        }
        if (!moved) {
            break;
        }
    }
    // Best visited configuration (the walk above already ends on it; this makes the contract explicit).
    res.best = config_of(cur);
    res.score = cur_v;
    for (const auto& [c, v] : res.visited) {
        if (v > res.score) {
            res.best = c;
            res.score = v;
        }
    }
    return res;
}

}  // namespace ital
