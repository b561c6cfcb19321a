#include <doctest.h>

#include <cmath>

#include "ital/mvn.hpp"
#include "support.hpp"

using namespace ital;

namespace {

Eigen::MatrixXd equicorrelated(std::size_t k, double rho) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), rho);
    S.diagonal().setOnes();
    return S;
}

}  // namespace

TEST_SUITE("mvn") {
    TEST_CASE("univariate normal") {
        CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
        CHECK(normal_cdf(-8.0) == doctest::Approx(6.220960574271785e-16).epsilon(1e-8));
        for (double p : {1e-10, 0.01, 0.3, 0.5, 0.77, 0.999}) {
            CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
        }
    }

    TEST_CASE("bivariate upper probability against quadrature") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-2.5, 2.5), r(-0.99, 0.99);
        for (int i = 0; i < 200; ++i) {
            const double h = u(rng), k = u(rng), rho = r(rng);
            Eigen::Vector2d m(-h, -k);
            Eigen::Matrix2d S;
            S << 1.0, rho, rho, 1.0;
            const double ref = oracle::orthant(m, S, {1, 1});
            CHECK(bivariate_normal_upper(h, k, rho) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
        }
        // closed forms: P(X > 0, Y > 0) = 1/4 + asin(rho) / (2 pi)
        for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9, 1.0, -1.0}) {
            CHECK(bivariate_normal_upper(0.0, 0.0, rho) ==
                  doctest::Approx(0.25 + std::asin(rho) / (2.0 * M_PI)).epsilon(1e-14));
        }
    }

    TEST_CASE("rho = 0.5 positive orthant is one third") {
        const Eigen::Vector2d m = Eigen::Vector2d::Zero();
        const Eigen::Matrix2d S = equicorrelated(2, 0.5);
        const auto e = orthant_probability(m, S, RelevanceConfig({1, 1}));
        CHECK(e.probability == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        const auto mc = oracle::orthant_mc(m, S, {1, 1}, 2000000, 99);
        CHECK(std::abs(mc.first - 1.0 / 3.0) < 4.0 * mc.second);
    }

    TEST_CASE("equicorrelated closed forms up to four dimensions") {
        // P(all > 0) = 1/8 + 3 asin(rho)/(4 pi) in 3D; 1/(k+1) at rho = 1/2
        for (double rho : {-0.3, 0.2, 0.5, 0.8}) {
            const Eigen::VectorXd m = Eigen::VectorXd::Zero(3);
            const auto e = orthant_probability(m, equicorrelated(3, rho), RelevanceConfig({1, 1, 1}));
            CHECK(e.probability == doctest::Approx(0.125 + 3.0 * std::asin(rho) / (4.0 * M_PI)).epsilon(1e-6));
        }
        for (std::size_t k : {4u, 5u, 6u}) {
            const Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
            const auto e = orthant_probability(m, equicorrelated(k, 0.5), RelevanceConfig(std::vector<int>(k, 1)));
            CHECK(std::abs(e.probability - 1.0 / static_cast<double>(k + 1)) <= std::max(e.error_estimate, 1e-4));
            CHECK(e.converged);
        }
    }

    TEST_CASE("tables agree with quadrature in three dimensions") {
        std::mt19937_64 rng(2);
        for (int inst = 0; inst < 25; ++inst) {
            const auto S = oracle::random_spd(3, rng);
            const auto m = oracle::random_vector(3, rng, 0.8);
            const auto t = orthant_probabilities_all(m, S);
            for (std::uint32_t r = 0; r < 8; ++r) {
                const double ref = oracle::orthant(m, S, oracle::signs_of(r, 3));
                CHECK(std::abs(t[r].probability - ref) < 1e-6);
                const auto single = orthant_probability(m, S, RelevanceConfig::from_mask(r, 3));
                CHECK(std::abs(single.probability - ref) < 1e-6);
            }
        }
    }

    TEST_CASE("QMC dimensions agree with Monte Carlo within the reported error") {
        std::mt19937_64 rng(3);
        for (std::size_t k : {4u, 5u}) {
            for (int inst = 0; inst < 4; ++inst) {
                const auto S = oracle::random_spd(k, rng);
                const auto m = oracle::random_vector(k, rng, 0.5);
                const auto t = orthant_probabilities_all(m, S);
                for (std::uint32_t r : {0u, 1u, (1u << k) - 1u, 5u}) {
                    const auto mc = oracle::orthant_mc(m, S, oracle::signs_of(r, k), 400000, 1000 + r);
                    CHECK(std::abs(t[r].probability - mc.first) <= 3.0 * t[r].error_estimate + 4.0 * mc.second);
                    const auto single = orthant_probability(m, S, RelevanceConfig::from_mask(r, k));
                    CHECK(std::abs(single.probability - mc.first) <= 3.0 * single.error_estimate + 4.0 * mc.second);
                }
            }
        }
    }

    TEST_CASE("tables sum to one") {
        std::mt19937_64 rng(4);
        for (std::size_t k = 1; k <= 7; ++k) {
            for (int inst = 0; inst < 10; ++inst) {
                const auto t = orthant_probabilities_all(oracle::random_vector(k, rng), oracle::random_spd(k, rng));
                CHECK(t.sum() == doctest::Approx(1.0).epsilon(1e-3));
                double s = 0.0;
                for (const double p : t.normalized()) {
                    CHECK(p >= 0.0);
                    s += p;
                }
                CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("deterministic dimensions and zero means") {
        // second coordinate has no variance: its sign is fixed by the mean
        Eigen::Vector2d m(0.3, 0.7);
        Eigen::Matrix2d S;
        S << 1.0, 0.0, 0.0, 0.0;
        CHECK(orthant_probability(m, S, RelevanceConfig({1, 1})).probability ==
              doctest::Approx(normal_cdf(0.3)).epsilon(1e-12));
        CHECK(orthant_probability(m, S, RelevanceConfig({1, -1})).probability == 0.0);
        const auto t = orthant_probabilities_all(m, S);
        CHECK(t[0b10].probability == doctest::Approx(normal_cdf(-0.3)).epsilon(1e-12));
        CHECK(t[0b01].probability == 0.0);

        // a mean of exactly zero counts as irrelevant
        Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
        Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
        CHECK(orthant_probability(z, zero, RelevanceConfig({-1})).probability == 1.0);
        CHECK(orthant_probability(z, zero, RelevanceConfig({1})).probability == 0.0);

        // perfectly correlated pair, rank deficient covariance
        Eigen::Matrix2d P = Eigen::Matrix2d::Ones();
        const Eigen::Vector2d zero2 = Eigen::Vector2d::Zero();
        const auto tp = orthant_probabilities_all(zero2, P);
        CHECK(tp[0b11].probability == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(tp[0b01].probability == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    }

    TEST_CASE("random shifts are seeded") {
        std::mt19937_64 rng(5);
        const auto S = oracle::random_spd(5, rng);
        const auto m = oracle::random_vector(5, rng);
        const RelevanceConfig r({1, -1, 1, 1, -1});
        const auto a = orthant_probability(m, S, r);
        const auto b = orthant_probability(m, S, r);
        CHECK(a.probability == b.probability);
        OrthantOptions o;
        o.seed = 77;
        const auto c = orthant_probability(m, S, r, o);
        CHECK(std::abs(c.probability - a.probability) <= a.error_estimate + c.error_estimate + 1e-12);
    }

    TEST_CASE("shrinking the orthant never adds mass") {
        // fixing an extra coordinate to a sign is a subset of the marginal event
        std::mt19937_64 rng(6);
        for (std::size_t k = 2; k <= 3; ++k) {
            for (int inst = 0; inst < 20; ++inst) {
                const auto S = oracle::random_spd(k, rng);
                const auto m = oracle::random_vector(k, rng);
                const auto t = orthant_probabilities_all(m, S);
                for (std::uint32_t r = 0; r < t.count(); ++r) {
                    const double marg =
                        t[r].probability + t[r ^ (1u << (k - 1))].probability;  // drop last coordinate
                    const auto sub = orthant_probabilities_all(m.head(static_cast<Eigen::Index>(k - 1)),
                                                               S.topLeftCorner(static_cast<Eigen::Index>(k - 1),
                                                                               static_cast<Eigen::Index>(k - 1)));
                    CHECK(t[r].probability <= sub[r & ((1u << (k - 1)) - 1u)].probability + 1e-6);
                    CHECK(marg == doctest::Approx(sub[r & ((1u << (k - 1)) - 1u)].probability).epsilon(1e-6));
                }
            }
        }
    }

    TEST_CASE("contract errors") {
        const Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(orthant_probability(m, Eigen::MatrixXd::Identity(3, 3), RelevanceConfig({1, 1})),
                        ContractError);
        CHECK_THROWS_AS(orthant_probability(m, Eigen::MatrixXd::Identity(2, 2), RelevanceConfig({1, 1, 1})),
                        ContractError);
        Eigen::Matrix2d neg;
        neg << 1.0, 2.0, 2.0, 1.0;
        CHECK_THROWS_AS(orthant_probability(m, neg, RelevanceConfig({1, 1})), NumericalError);
        CHECK_THROWS_AS(RelevanceConfig({1, 0}), ContractError);
        OrthantOptions small;
        small.max_dimension = 3;
        CHECK_THROWS_AS(orthant_probabilities_all(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4), small),
                        CapacityError);
    }

    TEST_CASE("entropy") {
        const std::vector<double> p{0.5, 0.5};
        CHECK(entropy(p) == doctest::Approx(std::log(2.0)));
        const std::vector<double> q{1.0, 0.0};
        CHECK(entropy(q) == 0.0);
    }
}
