#pragma once
// Reference implementations used as test oracles. They share no code with the
// library: the kernel, the GP and the orthant integrals are recomputed here from
// their definitions with dense linear algebra and adaptive quadrature.

#include <Eigen/Dense>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "ital/common.hpp"

namespace oracle {

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Random symmetric positive definite matrix with unit-ish scale.
inline Eigen::MatrixXd random_spd(std::size_t k, std::mt19937_64& rng, double ridge = 0.05) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd A(k, k);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            A(i, j) = z(rng);
        }
    }
    Eigen::MatrixXd S = A * A.transpose() / static_cast<double>(k);
    S.diagonal().array() += ridge;
    return S;
}

inline Eigen::VectorXd random_vector(std::size_t k, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    Eigen::VectorXd v(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v(i) = z(rng);
    }
    return v;
}

/// P(sign(y_i) = s_i for all i), y ~ N(m, S), by conditioning on the first
/// coordinate and integrating it out with adaptive Gauss-Kronrod. Practical
/// for up to 3 dimensions.
inline double orthant(const Eigen::VectorXd& m, const Eigen::MatrixXd& S, const std::vector<int>& s) {
    const Eigen::Index k = m.size();
    if (k == 0) {
        return 1.0;
    }
    const double var = S(0, 0);
    if (var <= 1e-14) {
        // degenerate leading dimension, distribution of the rest unchanged
        const bool ok = s[0] > 0 ? m(0) > 0.0 : m(0) <= 0.0;
        if (!ok) {
            return 0.0;
        }
        if (k == 1) {
            return 1.0;
        }
        return orthant(m.tail(k - 1), S.bottomRightCorner(k - 1, k - 1), std::vector<int>(s.begin() + 1, s.end()));
    }
    const double sd = std::sqrt(var);
    if (k == 1) {
        return s[0] > 0 ? Phi(m(0) / sd) : Phi(-m(0) / sd);
    }
    const Eigen::VectorXd c = S.col(0).tail(k - 1) / var;
    const Eigen::MatrixXd R = S.bottomRightCorner(k - 1, k - 1) - c * S.row(0).tail(k - 1);
    const std::vector<int> rest(s.begin() + 1, s.end());
    // y0 = m0 + sd z; region s0 * y0 > 0
    const double z0 = -m(0) / sd;
    double lo = s[0] > 0 ? z0 : -12.0;
    double hi = s[0] > 0 ? 12.0 : z0;
    lo = std::max(lo, -12.0);
    hi = std::min(hi, 12.0);
    if (hi <= lo) {
        return 0.0;
    }
    auto f = [&](double z) {
        const double y0 = m(0) + sd * z;
        const Eigen::VectorXd mr = m.tail(k - 1) + c * (y0 - m(0));
        return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) * orthant(mr, R, rest);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-11);
}

inline std::vector<int> signs_of(std::uint32_t mask, std::size_t k) {
    std::vector<int> s(k);
    for (std::size_t i = 0; i < k; ++i) {
        s[i] = (mask >> i) & 1U ? 1 : -1;
    }
    return s;
}

/// Plain Monte Carlo orthant estimate with its standard error.
inline std::pair<double, double> orthant_mc(const Eigen::VectorXd& m, const Eigen::MatrixXd& S,
                                            const std::vector<int>& s, std::size_t samples, std::uint64_t seed) {
    const Eigen::Index k = m.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::MatrixXd T = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::size_t hits = 0;
    Eigen::VectorXd e(k);
    for (std::size_t n = 0; n < samples; ++n) {
        for (Eigen::Index i = 0; i < k; ++i) {
            e(i) = z(rng);
        }
        const Eigen::VectorXd y = m + T * e;
        bool in = true;
        for (Eigen::Index i = 0; i < k && in; ++i) {
            in = s[static_cast<std::size_t>(i)] > 0 ? y(i) > 0.0 : y(i) <= 0.0;
        }
        hits += in;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    // with no hits the binomial variance is taken at one hit, not at zero
    const double floor = 1.0 / static_cast<double>(samples);
    return {p, std::sqrt(std::max(p * (1.0 - p), floor * (1.0 - floor)) / static_cast<double>(samples))};
}

/// Dense RBF kernel with index-delta noise on the diagonal.
inline Eigen::MatrixXd kernel(const Eigen::MatrixXd& X, double sv, double ls, double sn) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d2 = (X.row(i) - X.row(j)).squaredNorm();
            K(i, j) = sv * sv * std::exp(-d2 / (2.0 * ls * ls)) + (i == j ? sn * sn : 0.0);
        }
    }
    return K;
}

struct Prediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// GP posterior on `query` after observing `labels` at `labeled`, from an
/// explicit inverse of the labeled sub-kernel.
inline Prediction predict(const Eigen::MatrixXd& K, const std::vector<ital::Index>& labeled,
                          const std::vector<double>& labels, const std::vector<ital::Index>& query) {
    const auto l = static_cast<Eigen::Index>(labeled.size());
    const auto q = static_cast<Eigen::Index>(query.size());
    Eigen::MatrixXd Kll(l, l), Kql(q, l), Kqq(q, q);
    Eigen::VectorXd y(l);
    for (Eigen::Index a = 0; a < l; ++a) {
        y(a) = labels[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < l; ++b) {
            Kll(a, b) = K(labeled[a], labeled[b]);
        }
    }
    for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = 0; b < l; ++b) {
            Kql(a, b) = K(query[a], labeled[b]);
        }
        for (Eigen::Index b = 0; b < q; ++b) {
            Kqq(a, b) = K(query[a], query[b]);
        }
    }
    Prediction p;
    if (l == 0) {
        p.mean = Eigen::VectorXd::Zero(q);
        p.cov = Kqq;
        return p;
    }
    const Eigen::MatrixXd inv = Kll.inverse();
    p.mean = Kql * inv * y;
    p.cov = Kqq - Kql * inv * Kql.transpose();
    p.cov = 0.5 * (p.cov + p.cov.transpose());
    return p;
}

/// Feedback likelihood of the annotator model, written out case by case.
inline double feedback_likelihood(int f, int r, double p_label, double p_mistake) {
    if (f == 0) {
        return 1.0 - p_label;
    }
    return f == r ? p_label * (1.0 - p_mistake) : p_label * p_mistake;
}

/// Mutual information between batch relevance and feedback by brute-force
/// enumeration of every (r, f) pair. P(r | f) refits the GP from scratch on the
/// original labels plus the nonzero entries of f. The refit fixes the answered
/// entries to their labels, so only the unanswered ones are predicted.
inline double mutual_information(const Eigen::MatrixXd& K, const std::vector<ital::Index>& labeled,
                                 const std::vector<double>& labels, const std::vector<ital::Index>& batch,
                                 double p_label, double p_mistake) {
    const std::size_t k = batch.size();
    const Prediction prior_pred = predict(K, labeled, labels, batch);
    std::vector<double> prior(std::size_t{1} << k);
    double total = 0.0;
    for (std::uint32_t r = 0; r < prior.size(); ++r) {
        prior[r] = orthant(prior_pred.mean, prior_pred.cov, signs_of(r, k));
        total += prior[r];
    }
    for (auto& p : prior) {
        p /= total;
    }
    std::size_t nf = 1;
    for (std::size_t i = 0; i < k; ++i) {
        nf *= 3;
    }
    double mi = 0.0;
    for (std::size_t code = 0; code < nf; ++code) {
        std::vector<int> f(k);
        std::size_t c = code;
        for (std::size_t i = 0; i < k; ++i) {
            f[i] = static_cast<int>(c % 3) - 1;
            c /= 3;
        }
        std::vector<ital::Index> L = labeled;
        std::vector<double> y = labels;
        std::vector<ital::Index> q;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < k; ++i) {
            if (f[i] != 0) {
                L.push_back(batch[i]);
                y.push_back(f[i]);
            } else {
                q.push_back(batch[i]);
                rest.push_back(i);
            }
        }
        std::vector<double> table(std::size_t{1} << rest.size(), 1.0);
        if (!rest.empty()) {
            const Prediction pr = predict(K, L, y, q);
            double t = 0.0;
            for (std::uint32_t m = 0; m < table.size(); ++m) {
                table[m] = orthant(pr.mean, pr.cov, signs_of(m, rest.size()));
                t += table[m];
            }
            for (auto& v : table) {
                v /= t;
            }
        }
        std::vector<double> post(prior.size(), 0.0);
        for (std::uint32_t r = 0; r < prior.size(); ++r) {
            bool agrees = true;
            std::uint32_t rm = 0;
            std::size_t b = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const int ri = (r >> i) & 1U ? 1 : -1;
                if (f[i] != 0) {
                    agrees = agrees && ri == f[i];
                } else {
                    rm |= ri > 0 ? 1U << b : 0U;
                    ++b;
                }
            }
            post[r] = agrees ? table[rm] : 0.0;
        }
        for (std::uint32_t r = 0; r < prior.size(); ++r) {
            double pf = 1.0;
            for (std::size_t i = 0; i < k; ++i) {
                pf *= feedback_likelihood(f[i], (r >> i) & 1U ? 1 : -1, p_label, p_mistake);
            }
            if (pf <= 0.0 || prior[r] <= 0.0) {
                continue;
            }
            const double pp = std::max(post[r], 1e-12);
            mi += prior[r] * pf * std::log(pp / std::max(prior[r], 1e-12));
        }
    }
    return mi;
}

/// AP from its definition: mean over relevant items of precision at their rank.
inline double average_precision(const std::vector<double>& scores, const std::vector<char>& relevant) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (relevant[order[rank]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return hits ? sum / static_cast<double>(hits) : 0.0;
}

}  // namespace oracle
