#include <doctest.h>

#include "ital/mutual_information.hpp"
#include "ital/selection.hpp"
#include "support.hpp"

using namespace ital;

namespace {

struct Toy {
    std::shared_ptr<FeatureMatrix> X;
    std::unique_ptr<KernelMatrix> K;
    Eigen::MatrixXd dense;
    IdList labeled;
    std::vector<int> labels;
    GPState state;
};

Toy make_toy(std::mt19937_64& rng, std::size_t n, std::size_t labeled_count) {
    std::uniform_real_distribution<double> u;
    Toy t;
    t.X = std::make_shared<FeatureMatrix>(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < t.X->rows(); ++i) {
        (*t.X)(i, 0) = u(rng);
        (*t.X)(i, 1) = u(rng);
    }
    const double ls = 0.2 + 0.4 * u(rng);
    const double sn = 0.05 + 0.3 * u(rng);
    t.K = std::make_unique<KernelMatrix>(t.X, KernelConfig{1.0, ls, sn});
    t.dense = oracle::kernel(*t.X, 1.0, ls, sn);
    for (std::size_t i = 0; i < labeled_count; ++i) {
        t.labeled.push_back(i);
        t.labels.push_back(i == 0 || u(rng) < 0.4 ? 1 : -1);
    }
    t.state = gp_fit(*t.K, t.labeled, t.labels);
    return t;
}

double oracle_mi(const Toy& t, const IdList& batch, const UserModelParams& p) {
    std::vector<double> y(t.labels.begin(), t.labels.end());
    return oracle::mutual_information(t.dense, t.labeled, y, batch, p.p_label, p.p_mistake);
}

}  // namespace

TEST_SUITE("user-model") {
    TEST_CASE("case table") {
        const UserModelParams p{0.8, 0.1};
        CHECK(feedback_probability(0, 1, p) == doctest::Approx(0.2));
        CHECK(feedback_probability(0, -1, p) == doctest::Approx(0.2));
        CHECK(feedback_probability(1, 1, p) == doctest::Approx(0.72));
        CHECK(feedback_probability(-1, 1, p) == doctest::Approx(0.08));
        CHECK(feedback_probability(-1, -1, p) == doctest::Approx(0.72));
        const std::vector<int> f{1, 0, -1};
        CHECK(feedback_probability(f, RelevanceConfig({1, 1, 1}), p) == doctest::Approx(0.72 * 0.2 * 0.08));
        // every r distributes unit mass over f
        for (int r : {-1, 1}) {
            double s = 0.0;
            for (int v : {-1, 0, 1}) {
                s += feedback_probability(v, r, p);
            }
            CHECK(s == doctest::Approx(1.0));
        }
        CHECK_THROWS_AS((UserModelParams{1.2, 0.0}.validate()), ConfigError);
        CHECK_THROWS_AS((UserModelParams{0.5, 1.0}.validate()), ConfigError);
        CHECK_THROWS_AS((feedback_probability(2, 1, p)), ContractError);
    }
}

TEST_SUITE("mutual-information") {
    TEST_CASE("matches brute-force enumeration with refits") {
        std::mt19937_64 rng(42);
        const std::vector<UserModelParams> users{{1.0, 0.0}, {0.5, 0.25}, {1.0, 0.3}, {0.6, 0.0}, {0.8, 0.1}};
        for (int inst = 0; inst < 12; ++inst) {
            const Toy t = make_toy(rng, 8, 1 + inst % 3);
            const std::size_t k = 1 + inst % 3;
            IdList batch;
            for (std::size_t i = 0; i < k; ++i) {
                batch.push_back(7 - i);
            }
            for (const auto& p : users) {
                const double got = approximate_mutual_information(t.state, *t.K, batch, p);
                const double want = oracle_mi(t, batch, p);
                CHECK(got == doctest::Approx(want).epsilon(1e-6).scale(1.0));
            }
        }
    }

    TEST_CASE("perfect user reduces to the joint entropy") {
        std::mt19937_64 rng(5);
        for (int inst = 0; inst < 10; ++inst) {
            const Toy t = make_toy(rng, 9, 2);
            const IdList batch{3, 5, 8};
            const auto dist = gp_predict(t.state, *t.K, batch);
            const double fast = mutual_information(dist, UserModelParams{});
            const auto full = information_terms(dist, UserModelParams{}, {}, true);
            CHECK(fast == doctest::Approx(full.mutual_information).epsilon(1e-9));
            CHECK(fast == doctest::Approx(joint_entropy(dist)).epsilon(1e-12));
        }
    }

    TEST_CASE("a user who never answers carries no information") {
        std::mt19937_64 rng(6);
        for (int inst = 0; inst < 10; ++inst) {
            const Toy t = make_toy(rng, 7, 2);
            const IdList batch{2, 4, 6};
            CHECK(std::abs(approximate_mutual_information(t.state, *t.K, batch, {0.0, 0.0})) < 1e-9);
        }
    }

    TEST_CASE("bounded by the batch entropy") {
        std::mt19937_64 rng(8);
        for (int inst = 0; inst < 15; ++inst) {
            const Toy t = make_toy(rng, 8, 1 + inst % 2);
            const IdList batch{4, 5, 6, 7};
            const auto dist = gp_predict(t.state, *t.K, batch);
            const double h = joint_entropy(dist);
            for (const UserModelParams p : {UserModelParams{0.7, 0.1}, UserModelParams{1.0, 0.0},
                                            UserModelParams{0.4, 0.2}}) {
                CHECK(mutual_information(dist, p) <= h + 1e-6);
            }
        }
    }

    TEST_CASE("feedback posteriors are distributions") {
        std::mt19937_64 rng(9);
        const Toy t = make_toy(rng, 6, 1);
        const IdList batch{3, 4};
        const auto dist = gp_predict(t.state, *t.K, batch);
        const auto terms = information_terms(dist, {0.7, 0.2}, {}, true);
        CHECK(terms.feedbacks.size() == 9);
        double pf = 0.0;
        for (const auto& fb : terms.feedbacks) {
            pf += fb.probability;
            double s = 0.0;
            for (const double v : fb.posterior) {
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(pf == doctest::Approx(1.0).epsilon(1e-9));
        // skipping everything leaves the prior unchanged
        for (const auto& fb : terms.feedbacks) {
            if (fb.feedback == FeedbackVector{0, 0}) {
                for (std::size_t r = 0; r < 4; ++r) {
                    CHECK(fb.posterior[r] == doctest::Approx(terms.prior[r]).epsilon(1e-12));
                }
            }
        }
    }

    TEST_CASE("single candidate obeys both forms of the definition") {
        // with one candidate and no mistakes the updated GP is the exact
        // posterior, so H(R) - H(R|F) equals the summed log-ratio form
        std::mt19937_64 rng(10);
        for (int inst = 0; inst < 10; ++inst) {
            const Toy t = make_toy(rng, 6, 2);
            const IdList batch{5};
            const auto dist = gp_predict(t.state, *t.K, batch);
            const UserModelParams p{0.3 + 0.07 * inst, 0.0};
            const auto terms = information_terms(dist, p, {}, true);
            double h_cond = 0.0;
            for (const auto& fb : terms.feedbacks) {
                h_cond += fb.probability * entropy(fb.posterior);
            }
            CHECK(terms.entropy - h_cond == doctest::Approx(terms.mutual_information).epsilon(1e-9));
            CHECK(terms.mutual_information >= -1e-12);
        }
    }

    TEST_CASE("argument checks") {
        std::mt19937_64 rng(11);
        const Toy t = make_toy(rng, 6, 2);
        CHECK_THROWS_AS(approximate_mutual_information(t.state, *t.K, IdList{}, {}), ContractError);
        CHECK_THROWS_AS(approximate_mutual_information(t.state, *t.K, IdList{3, 3}, {}), ContractError);
        CHECK_THROWS_AS(approximate_mutual_information(t.state, *t.K, IdList{0}, {}), ContractError);
        CHECK_THROWS_AS(approximate_mutual_information(t.state, *t.K, IdList{17}, {}), ContractError);
        CHECK_THROWS_AS(approximate_mutual_information(t.state, *t.K, IdList{4}, {1.5, 0.0}), ConfigError);
    }
}

TEST_SUITE("selection") {
    TEST_CASE("first greedy step is the argmax over single candidates") {
        std::mt19937_64 rng(12);
        for (int inst = 0; inst < 5; ++inst) {
            const Toy t = make_toy(rng, 10, 2);
            IdList pool;
            for (Index i = 2; i < 10; ++i) {
                pool.push_back(i);
            }
            const UserModelParams p{0.8, 0.1};
            const auto b = select_batch_greedy(t.state, *t.K, pool, 1, p);
            REQUIRE(b.ids.size() == 1);
            double best = -1e300;
            Index arg = 0;
            for (const Index i : pool) {
                const double v = oracle_mi(t, IdList{i}, p);
                if (v > best + 1e-12) {
                    best = v;
                    arg = i;
                }
            }
            CHECK(b.ids[0] == arg);
            CHECK(b.criterion_value == doctest::Approx(best).epsilon(1e-6));
        }
    }

    TEST_CASE("greedy batch matches a sequential brute-force greedy") {
        std::mt19937_64 rng(13);
        const Toy t = make_toy(rng, 9, 1);
        IdList pool{1, 2, 3, 4, 5, 6, 7, 8};
        const UserModelParams p{0.7, 0.2};
        const auto b = select_batch_greedy(t.state, *t.K, pool, 3, p);
        IdList chosen;
        for (int step = 0; step < 3; ++step) {
            double best = -1e300;
            Index arg = 0;
            for (const Index i : pool) {
                if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) {
                    continue;
                }
                IdList trial = chosen;
                trial.push_back(i);
                const double v = oracle_mi(t, trial, p);
                if (v > best + 1e-9) {
                    best = v;
                    arg = i;
                }
            }
            chosen.push_back(arg);
        }
        CHECK(b.ids == chosen);
    }

    TEST_CASE("results do not depend on the worker count") {
        std::mt19937_64 rng(14);
        const Toy t = make_toy(rng, 10, 2);
        IdList pool{2, 3, 4, 5, 6, 7, 8, 9};
        SelectionOptions one, four;
        one.workers = 1;
        four.workers = 4;
        const auto a = select_batch_greedy(t.state, *t.K, pool, 3, {0.9, 0.05}, one);
        const auto b = select_batch_greedy(t.state, *t.K, pool, 3, {0.9, 0.05}, four);
        CHECK(a.ids == b.ids);
        CHECK(a.criterion_value == b.criterion_value);
    }

    TEST_CASE("ties go to the lowest index") {
        // four identical far-away points: equal MI, lowest index wins
        auto X = std::make_shared<FeatureMatrix>(5, 1);
        *X << 0.0, 5.0, 5.0, 5.0, 5.0;
        const KernelMatrix K(X, KernelConfig{1.0, 0.3, 0.1});
        const GPState s = gp_fit(K, IdList{0}, std::vector<int>{1});
        const IdList pool{4, 2, 3, 1};
        const auto b = select_batch_greedy(s, K, pool, 1, {});
        CHECK(b.ids == IdList{1});
    }

    TEST_CASE("pool handling") {
        std::mt19937_64 rng(15);
        const Toy t = make_toy(rng, 10, 2);
        CHECK(select_batch_greedy(t.state, *t.K, IdList{}, 3, {}).ids.empty());
        CHECK(select_batch_greedy(t.state, *t.K, IdList{4, 5}, 4, {}).ids.size() == 2);
        CHECK_THROWS_AS(select_batch_greedy(t.state, *t.K, IdList{4, 5}, 0, {}), ContractError);
        CHECK_THROWS_AS(select_batch_greedy(t.state, *t.K, IdList{0, 5}, 1, {}), ContractError);
        CHECK_THROWS_AS(select_batch_greedy(t.state, *t.K, IdList{5, 5}, 1, {}), ContractError);
        const IdList all{2, 3, 4, 5, 6, 7, 8, 9};
        const auto p1 = candidate_pool(t.state, *t.K, all, 4, 99);
        const auto p2 = candidate_pool(t.state, *t.K, all, 4, 99);
        CHECK(p1 == p2);
        CHECK(p1.size() == 4);
        CHECK(std::is_sorted(p1.begin(), p1.end()));
        CHECK(candidate_pool(t.state, *t.K, all, 0, 1) == all);
        const IdList shuffled{9, 2, 5};
        CHECK(candidate_pool(t.state, *t.K, shuffled, 0, 1) == IdList{2, 5, 9});
    }

    TEST_CASE("selected batches are distinct and unlabeled") {
        std::mt19937_64 rng(16);
        for (int inst = 0; inst < 5; ++inst) {
            const Toy t = make_toy(rng, 10, 3);
            IdList pool;
            for (Index i = 3; i < 10; ++i) {
                pool.push_back(i);
            }
            const auto b = select_batch_greedy(t.state, *t.K, pool, 4, {0.8, 0.1});
            IdList s = b.ids;
            std::sort(s.begin(), s.end());
            CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
            for (const Index i : b.ids) {
                CHECK_FALSE(t.state.contains(i));
            }
        }
    }
}
