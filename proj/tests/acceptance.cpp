// Acceptance checks. Each one prints a single PASS/FAIL line; run with a
// criterion name to run just that one, or without arguments to run all.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "ital/benchmark.hpp"
#include "ital/dataset.hpp"
#include "ital/features.hpp"
#include "ital/mutual_information.hpp"
#include "ital/random.hpp"
#include "ital/selection.hpp"
#include "ital/simulation.hpp"
#include "ital/tuning.hpp"
#include "support.hpp"

using namespace ital;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
    Outcome outcome = Outcome::fail;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

Verdict verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

// ---------------------------------------------------------------------------

Verdict orthant_normalization() {
    std::mt19937_64 rng(20240501);
    double worst = 0.0;
    std::size_t outside = 0;
    for (std::size_t k = 2; k <= 6; ++k) {
        for (int inst = 0; inst < 100; ++inst) {
            const Eigen::MatrixXd S = oracle::random_spd(k, rng);
            const Eigen::VectorXd m = oracle::random_vector(k, rng, 0.8);
            double sum = 0.0;
            for (std::uint32_t mask = 0; mask < (1U << k); ++mask) {
                sum += orthant_probability(m, S, RelevanceConfig::from_mask(mask, k)).probability;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
            if (sum < 0.999 || sum > 1.001) {
                ++outside;
            }
        }
    }
    Eigen::Matrix2d C;
    C << 1.0, 0.5, 0.5, 1.0;
    const double p = orthant_probability(Eigen::Vector2d::Zero(), C, RelevanceConfig({1, 1})).probability;
    const auto mc = oracle::orthant_mc(Eigen::Vector2d::Zero(), C, {1, 1}, 4000000, 99);
    const bool mc_ok = std::abs(mc.first - 1.0 / 3.0) < 4.0 * mc.second && std::abs(p - mc.first) < 1e-3;
    const bool ok = outside == 0 && std::abs(p - 1.0 / 3.0) < 1e-3 && mc_ok;
    return verdict(ok, "500 covariances, " + std::to_string(outside) + " sums outside [0.999, 1.001], max |sum-1| " +
                           fmt(worst) + "; rho=0.5: " + fmt(p) + " vs 1/3, Monte Carlo " + fmt(mc.first) +
                           " +- " + fmt(mc.second));
}

// ---------------------------------------------------------------------------

Verdict gp_incremental() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u;
    double worst = 0.0;
    std::size_t updates = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const Index n = 90;
        auto X = std::make_shared<FeatureMatrix>(n, 3);
        for (Eigen::Index i = 0; i < X->size(); ++i) {
            X->data()[i] = u(rng);
        }
        const KernelConfig cfg{0.5 + u(rng), 0.15 + 0.5 * u(rng), 0.05 + 0.3 * u(rng)};
        const KernelMatrix K(X, cfg);
        IdList perm(n);
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::size_t l0 = 1 + rng() % 50;
        IdList ids(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(l0));
        std::vector<int> labels;
        for (std::size_t i = 0; i < l0; ++i) {
            labels.push_back(u(rng) < 0.3 ? 1 : -1);
        }
        GPState state = gp_fit(K, ids, labels);
        std::size_t next = l0;
        const std::size_t rounds = 1 + rng() % 5;
        for (std::size_t r = 0; r < rounds; ++r) {
            const std::size_t b = 1 + rng() % 4;
            IdList nid(perm.begin() + static_cast<std::ptrdiff_t>(next),
                       perm.begin() + static_cast<std::ptrdiff_t>(next + b));
            std::vector<int> nl;
            for (std::size_t i = 0; i < b; ++i) {
                nl.push_back(u(rng) < 0.5 ? 1 : -1);
            }
            next += b;
            state = gp_update(state, K, nid, nl);
            ids.insert(ids.end(), nid.begin(), nid.end());
            labels.insert(labels.end(), nl.begin(), nl.end());
            ++updates;
        }
        const GPState refit = gp_fit(K, ids, labels);
        IdList query(perm.begin() + static_cast<std::ptrdiff_t>(next), perm.end());
        const auto a = gp_predict(state, K, query);
        const auto c = gp_predict(refit, K, query);
        worst = std::max({worst, (a.mean - c.mean).cwiseAbs().maxCoeff(), (a.cov - c.cov).cwiseAbs().maxCoeff()});
    }
    return verdict(worst <= 1e-8, "200 instances, " + std::to_string(updates) +
                                      " updates, max |updated - refit| " + fmt(worst) + " (limit 1e-08)");
}

// ---------------------------------------------------------------------------

struct ToyData {
    std::shared_ptr<FeatureMatrix> X;
    std::unique_ptr<KernelMatrix> K;
    Eigen::MatrixXd dense;
    IdList labeled;
    std::vector<int> labels;
    GPState state;
    IdList batch;
};

ToyData random_toy(std::mt19937_64& rng, std::size_t max_n, std::size_t max_k) {
    std::uniform_real_distribution<double> u;
    ToyData t;
    const std::size_t k = 1 + rng() % max_k;
    const std::size_t n = std::max<std::size_t>(k + 1, 4 + rng() % (max_n - 3));
    t.X = std::make_shared<FeatureMatrix>(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < t.X->size(); ++i) {
        t.X->data()[i] = u(rng);
    }
    const double ls = 0.15 + 0.5 * u(rng);
    const double sn = 0.05 + 0.4 * u(rng);
    t.K = std::make_unique<KernelMatrix>(t.X, KernelConfig{1.0, ls, sn});
    t.dense = oracle::kernel(*t.X, 1.0, ls, sn);
    IdList perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t l = 1 + rng() % (n - k);
    for (std::size_t i = 0; i < l; ++i) {
        t.labeled.push_back(perm[i]);
        t.labels.push_back(i == 0 || u(rng) < 0.4 ? 1 : -1);
    }
    t.batch.assign(perm.begin() + static_cast<std::ptrdiff_t>(l),
                   perm.begin() + static_cast<std::ptrdiff_t>(l + k));
    t.state = gp_fit(*t.K, t.labeled, t.labels);
    return t;
}

Verdict mi_oracle() {
    std::mt19937_64 rng(4242);
    const std::vector<UserModelParams> users{{1.0, 0.0}, {0.5, 0.25}, {1.0, 0.5}, {0.25, 0.0}};
    double worst_rel = 0.0;
    double worst_fast = 0.0;
    std::size_t bad = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const ToyData t = random_toy(rng, 10, 3);
        const std::vector<double> y(t.labels.begin(), t.labels.end());
        for (const auto& p : users) {
            const double got = approximate_mutual_information(t.state, *t.K, t.batch, p);
            const double want = oracle::mutual_information(t.dense, t.labeled, y, t.batch, p.p_label, p.p_mistake);
            // near-zero values are compared absolutely at the same scale
            const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-6);
            worst_rel = std::max(worst_rel, rel);
            if (rel > 1e-6) {
                ++bad;
            }
        }
        const auto dist = gp_predict(t.state, *t.K, t.batch);
        const double fast = mutual_information(dist, UserModelParams{});
        const double general = information_terms(dist, UserModelParams{}, {}, true).mutual_information;
        worst_fast = std::max(worst_fast, std::abs(fast - general));
    }
    const bool ok = bad == 0 && worst_fast <= 1e-9;
    return verdict(ok, "50 toy sets x 4 users, " + std::to_string(bad) + " mismatches, max relative error " +
                           fmt(worst_rel) + "; fast vs general path max diff " + fmt(worst_fast));
}

// ---------------------------------------------------------------------------

Verdict information_properties() {
    std::mt19937_64 rng(9090);
    std::uniform_real_distribution<double> u;
    double min_mi = 1e300;
    double worst_zero = 0.0;
    double worst_upper = -1e300;
    double worst_eq = 0.0;
    UserModelParams worst_eq_user;
    std::size_t worst_eq_k = 0;
    std::size_t eq_bad = 0;
    std::size_t eq_total = 0;
    // the same checks without annotation mistakes, reported for diagnosis
    double min_mi_exact = 1e300;
    double worst_eq_exact = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
        const ToyData t = random_toy(rng, 12, 4);
        const auto dist = gp_predict(t.state, *t.K, t.batch);
        const double h = joint_entropy(dist);
        std::vector<UserModelParams> users{{1.0, 0.0}, {u(rng), 0.0}, {1.0, 0.45 * u(rng)},
                                           {u(rng), 0.45 * u(rng)}};
        for (const auto& p : users) {
            const double mi = mutual_information(dist, p);
            min_mi = std::min(min_mi, mi);
            if (p.p_mistake == 0.0) {
                min_mi_exact = std::min(min_mi_exact, mi);
            }
            worst_upper = std::max(worst_upper, mi - h);
        }
        worst_zero = std::max(worst_zero, std::abs(mutual_information(dist, {0.0, 0.0})));
        worst_zero = std::max(worst_zero, std::abs(mutual_information(dist, {0.0, 0.3})));
        worst_zero = std::max(worst_zero, std::abs(mutual_information(dist, {1.0, 0.5})));

        if (dist.size() <= 2) {
            // entropy difference against the expected log ratio
            for (const auto& p : users) {
                const auto terms = information_terms(dist, p, {}, true);
                double conditional = 0.0;
                for (const auto& fp : terms.feedbacks) {
                    conditional += fp.probability * entropy(fp.posterior);
                }
                const double eq2 = terms.entropy - conditional;
                const double diff = std::abs(eq2 - terms.mutual_information);
                ++eq_total;
                if (p.p_mistake == 0.0) {
                    worst_eq_exact = std::max(worst_eq_exact, diff);
                }
                if (diff > 1e-6) {
                    ++eq_bad;
                }
                if (diff > worst_eq) {
                    worst_eq = diff;
                    worst_eq_user = p;
                    worst_eq_k = dist.size();
                }
            }
        }
    }
    const bool nonneg = min_mi >= -1e-9;
    const bool zero = worst_zero <= 1e-6;
    const bool upper = worst_upper <= 1e-6;
    const bool eq = eq_bad == 0;
    std::ostringstream d;
    d << "min MI " << fmt(min_mi) << (nonneg ? " ok" : " BELOW -1e-9") << "; uninformative users max |MI| "
      << fmt(worst_zero) << (zero ? " ok" : " TOO LARGE") << "; max MI - H " << fmt(worst_upper)
      << (upper ? " ok" : " TOO LARGE") << "; entropy-difference vs log-ratio form: " << eq_bad << "/" << eq_total
      << " instances beyond 1e-6, max diff " << fmt(worst_eq);
    if (!eq) {
        d << " (k=" << worst_eq_k << ", p_label=" << fmt(worst_eq_user.p_label)
          << ", p_mistake=" << fmt(worst_eq_user.p_mistake) << ")";
    }
    d << "; with p_mistake=0 only: min MI " << fmt(min_mi_exact) << ", max form diff " << fmt(worst_eq_exact);
    return verdict(nonneg && zero && upper && eq, d.str());
}

// ---------------------------------------------------------------------------

// Three tight clusters; a labeled query in the first, two exact copies of one
// candidate in the third.
Verdict diversity() {
    std::size_t both = 0;
    std::size_t duplicate_first = 0;
    std::size_t informative = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 0.04);
        const double centers[3][2] = {{0.2, 0.2}, {0.8, 0.25}, {0.5, 0.8}};
        const std::size_t per = 8;
        auto X = std::make_shared<FeatureMatrix>(3 * per + 1, 2);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < per; ++i) {
                X->row(static_cast<Eigen::Index>(c * per + i)) << centers[c][0] + g(rng), centers[c][1] + g(rng);
            }
        }
        const Index dup_a = 2 * per;
        const Index dup_b = 3 * per;
        X->row(static_cast<Eigen::Index>(dup_b)) = X->row(static_cast<Eigen::Index>(dup_a));
        const KernelMatrix K(X, KernelConfig{1.0, 0.15, 0.1});
        const GPState state = gp_fit(K, IdList{0}, std::vector<int>{1});
        IdList pool;
        for (Index i = 1; i <= dup_b; ++i) {
            pool.push_back(i);
        }
        SelectionOptions opt;
        opt.workers = 1;
        const auto batch = select_batch_greedy(state, K, pool, 2, UserModelParams{}, opt);
        const bool first_dup = batch.ids[0] == dup_a || batch.ids[0] == dup_b;
        const bool second_dup = batch.ids[1] == dup_a || batch.ids[1] == dup_b;
        if (first_dup && second_dup) {
            ++both;
        }
        if (first_dup) {
            ++duplicate_first;
            // some candidate outside the duplicate pair adds information to the first pick
            const double alone = approximate_mutual_information(state, K, IdList{batch.ids[0]}, UserModelParams{});
            bool found = false;
            for (const Index c : pool) {
                if (c == dup_a || c == dup_b) {
                    continue;
                }
                const double pair =
                    approximate_mutual_information(state, K, IdList{batch.ids[0], c}, UserModelParams{});
                found = found || pair > alone + 1e-3;
            }
            informative += found ? 1 : 0;
        }
    }
    return verdict(both == 0, "20 seeds, both copies selected in " + std::to_string(both) +
                                  "; a copy was the first pick in " + std::to_string(duplicate_first) +
                                  " seeds, with an informative distinct alternative in " +
                                  std::to_string(informative));
}

// ---------------------------------------------------------------------------

struct Aggregate {
    double aulc = 0.0;
    std::vector<double> curve;
    std::size_t tasks = 0;
};

SelectionOptions bench_selection() {
    SelectionOptions s;
    s.workers = 0;
    s.mi.orthant.tolerance = 1e-3;
    return s;
}

Aggregate run_tasks(const Workbench& wb, const std::vector<RetrievalTask>& tasks, const RunConfig& cfg) {
    Aggregate a;
    std::vector<std::vector<double>> curves;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        RunConfig c = cfg;
        c.seed = derive_seed(cfg.seed, {i});
        const LearningCurve lc = run_retrieval_task(wb, tasks[i], c);
        a.aulc += lc.aulc;
        curves.push_back(lc.ap_by_round);
    }
    a.tasks = tasks.size();
    a.aulc /= static_cast<double>(tasks.size());
    a.curve = mean_curve(curves);
    return a;
}

Dataset overlapping_blobs(std::size_t per_class, double spread, std::uint64_t seed) {
    BlobOptions o;
    o.classes = 3;
    o.per_class = per_class;
    o.spread = spread;
    o.test_fraction = 0.5;
    o.seed = seed;
    Dataset ds = make_blobs(o);
    ds.name = "blobs";
    return ds;
}

// hyper-parameters by cross-validation on the training split
KernelConfig tuned_kernel(const Dataset& ds) { return tune_kernel(ds, default_grid(ds, 1), TuningOptions{}).best; }

std::string describe(const KernelConfig& k) {
    return "kernel (" + fmt(k.sigma_var) + ", " + fmt(k.sigma_ls) + ", " + fmt(k.sigma_noise) + ")";
}

Verdict imperfect_user() {
    const Dataset ds = overlapping_blobs(40, 0.5, 11);
    const KernelConfig kc = tuned_kernel(ds);
    const KernelMatrix K(ds.features, kc);
    const FeatureIndex fi(ds.features);
    const Workbench wb{ds, K, fi};
    const auto tasks = make_tasks(ds, 14, 10, 4, 5);
    RunConfig cfg;
    cfg.strategy = StrategyId::ital;
    cfg.behavior = UserBehavior{0.5, 0.25};
    cfg.selection = bench_selection();
    cfg.seed = 31;
    cfg.user_model = UserModelParams{0.5, 0.25};
    const Aggregate matched = run_tasks(wb, tasks, cfg);
    cfg.user_model = UserModelParams{};
    const Aggregate perfect = run_tasks(wb, tasks, cfg);
    const bool ok = tasks.size() >= 40 && matched.aulc >= perfect.aulc - 0.01;
    return verdict(ok, describe(kc) + ", " + std::to_string(tasks.size()) + " tasks, AULC matched model " + fmt4(matched.aulc) +
                           " vs perfect-user assumption " + fmt4(perfect.aulc) + " (margin -0.01)");
}

Verdict baseline_sanity() {
    const Dataset ds = overlapping_blobs(40, 0.35, 12);
    const KernelConfig kc = tuned_kernel(ds);
    const KernelMatrix K(ds.features, kc);
    const FeatureIndex fi(ds.features);
    const Workbench wb{ds, K, fi};
    const auto tasks = make_tasks(ds, 14, 10, 4, 6);
    RunConfig base;
    base.selection = bench_selection();
    base.seed = 41;
    RunConfig frozen = base;
    frozen.strategy = StrategyId::random;
    frozen.update_model = false;
    const Aggregate control = run_tasks(wb, tasks, frozen);
    std::ostringstream d;
    d << describe(kc) << ", " << tasks.size() << " tasks, control AULC " << fmt4(control.aulc) << ";";
    bool ok = tasks.size() >= 40;
    std::map<StrategyId, Aggregate> results;
    for (const StrategyId s : all_strategies()) {
        RunConfig c = base;
        c.strategy = s;
        results[s] = run_tasks(wb, tasks, c);
        const bool beats = results[s].aulc > control.aulc;
        ok = ok && beats;
        d << " " << to_string(s) << " " << fmt4(results[s].aulc) << (beats ? "" : " (NOT ABOVE CONTROL)");
    }
    const double top3 = results[StrategyId::topscoring].curve.at(3);
    const double ital3 = results[StrategyId::ital].curve.at(3);
    ok = ok && top3 < ital3;
    d << "; mAP at round 3: topscoring " << fmt4(top3) << " vs ital " << fmt4(ital3);
    return verdict(ok, d.str());
}

Verdict usps_benchmark() {
    const char* manifest = std::getenv("ITAL_USPS_MANIFEST");
    if (manifest == nullptr || *manifest == '\0') {
        return {Outcome::skip, "ITAL_USPS_MANIFEST is not set; convert USPS with tools/usps_to_csv.py and ingest it"};
    }
    const Dataset ds = load_dataset(manifest);
    TuningOptions topt;
    topt.seed = 1;
    const TuningResult tuned = tune_kernel(ds, default_grid(ds, 1), topt);
    BenchmarkConfig cfg;
    cfg.strategies = {StrategyId::random, StrategyId::border, StrategyId::ital};
    cfg.queries_per_class = 5;
    cfg.rounds = 10;
    cfg.batch_size = 4;
    cfg.kernel = tuned.best;
    cfg.selection = bench_selection();
    if (const char* out = std::getenv("ITAL_USPS_OUT")) {
        cfg.out_dir = std::filesystem::path(out);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const BenchmarkResult res = run_benchmark(ds, cfg);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::map<std::string, double> aulc;
    for (const auto& s : res.behaviors.at(0).strategies) {
        aulc[s.strategy] = s.aulc;
    }
    const bool ok = aulc["ital"] - aulc["random"] >= 0.05 && aulc["ital"] >= aulc["border"] - 0.02;
    return verdict(ok, "AULC ital " + fmt4(aulc["ital"]) + ", random " + fmt4(aulc["random"]) + ", border " +
                           fmt4(aulc["border"]) + " (" + fmt(minutes) + " min)");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"orthant-normalization", orthant_normalization},
        {"gp-incremental", gp_incremental},
        {"mi-oracle", mi_oracle},
        {"information-properties", information_properties},
        {"diversity", diversity},
        {"usps-benchmark", usps_benchmark},
        {"imperfect-user", imperfect_user},
        {"baseline-sanity", baseline_sanity},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    bool failed = false;
    bool ran = false;
    bool skipped = false;
    for (const auto& [name, run] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) {
            continue;
        }
        ran = true;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {Outcome::fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
        std::printf("%s %s: %s [%.1fs]\n", tag, name.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failed = failed || v.outcome == Outcome::fail;
        skipped = skipped || v.outcome == Outcome::skip;
    }
    if (!ran) {
        std::fprintf(stderr, "unknown criterion\n");
        return 2;
    }
    if (failed) {
        return 1;
    }
    return skipped && wanted.size() == 1 ? 77 : 0;
}
