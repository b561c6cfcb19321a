#include "ital/mvn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

#include "ital/random.hpp"

namespace ital {

// ---------------------------------------------------------------------------
// Scalar helpers

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (p <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (p >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Quantile with the argument kept away from 0 and 1 so sampled values stay finite.
double safe_quantile(double p) {
    constexpr double lo = 1e-300;
    constexpr double hi = 1.0 - 1e-16;
    return normal_quantile(std::clamp(p, lo, hi));
}

}  // namespace

// Drezner-Wesolowsky / Genz bivariate normal upper tail with Gauss-Legendre
// rules of 6, 12 or 20 points depending on |rho|.
double bivariate_normal_upper(double h, double k, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (h == inf || k == inf) {
        return 0.0;
    }
    if (h == -inf) {
        return k == -inf ? 1.0 : normal_cdf(-k);
    }
    if (k == -inf) {
        return normal_cdf(-h);
    }
    r = std::clamp(r, -1.0, 1.0);
    if (r == 0.0) {
        return normal_cdf(-h) * normal_cdf(-k);
    }

    static constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static constexpr std::array<double, 3> x6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static constexpr std::array<double, 6> w12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                               0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static constexpr std::array<double, 6> x12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                               0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static constexpr std::array<double, 10> w20{
        0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
        0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
        0.1491729864726037,  0.1527533871307259};
    static constexpr std::array<double, 10> x20{
        0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
        0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
        0.2277858511416451, 0.07652652113349733};

    const double* w = nullptr;
    const double* x = nullptr;
    std::size_t lg = 0;
    const double ar = std::abs(r);
    if (ar < 0.3) {
        w = w6.data();
        x = x6.data();
        lg = 3;
    } else if (ar < 0.75) {
        w = w12.data();
        x = x12.data();
        lg = 6;
    } else {
        w = w20.data();
        x = x20.data();
        lg = 10;
    }

    const double tp = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r) / 2.0;
        for (std::size_t i = 0; i < lg; ++i) {
            for (const double xi : {1.0 - x[i], 1.0 + x[i]}) {
                const double sn = std::sin(asr * xi);
                bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / tp + normal_cdf(-h) * normal_cdf(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (ar < 1.0) {
            const double as = 1.0 - r * r;
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 80.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0) {
                bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            }
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(tp) * normal_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            double sum = 0.0;
            for (std::size_t i = 0; i < lg; ++i) {
                for (const double xi : {1.0 - x[i], 1.0 + x[i]}) {
                    const double xs = (a * xi) * (a * xi);
                    const double asr_i = -(bs / xs + hk) / 2.0;
                    if (asr_i > -100.0) {
                        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        const double rs = std::sqrt(1.0 - xs);
                        const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                        sum += w[i] * std::exp(asr_i) * (sp - ep);
                    }
                }
            }
            bvn = (a * sum - bvn) / tp;
        }
        if (r > 0.0) {
            bvn += normal_cdf(-std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double L = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
            bvn = L - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

double entropy(std::span<const double> probabilities, double floor) {
    double h = 0.0;
    for (const double p : probabilities) {
        if (p > 0.0) {
            h -= p * std::log(std::max(p, floor));
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// RelevanceConfig / OrthantTable

RelevanceConfig::RelevanceConfig(std::vector<int> signs) : signs_(std::move(signs)) {
    for (const int s : signs_) {
        if (s != 1 && s != -1) {
            throw ContractError("relevance config: entries must be -1 or +1");
        }
    }
    if (signs_.size() > 31) {
        throw CapacityError("relevance config: at most 31 entries");
    }
}

RelevanceConfig RelevanceConfig::from_mask(std::uint32_t mask, std::size_t k) {
    std::vector<int> s(k);
    for (std::size_t i = 0; i < k; ++i) {
        s[i] = (mask >> i) & 1U ? 1 : -1;
    }
    return RelevanceConfig(std::move(s));
}

std::uint32_t RelevanceConfig::mask() const {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < signs_.size(); ++i) {
        if (signs_[i] > 0) {
            m |= 1U << i;
        }
    }
    return m;
}

OrthantTable::OrthantTable(std::size_t dimension, std::vector<OrthantEstimate> entries)
    : dim_(dimension), entries_(std::move(entries)) {
    if (entries_.size() != (std::size_t{1} << dim_)) {
        throw ContractError("orthant table: expected 2^k entries");
    }
}

const OrthantEstimate& OrthantTable::at(const RelevanceConfig& r) const {
    if (r.size() != dim_) {
        throw ContractError("orthant table: config dimension mismatch");
    }
    return entries_[r.mask()];
}

double OrthantTable::sum() const {
    double s = 0.0;
    for (const auto& e : entries_) {
        s += e.probability;
    }
    return s;
}

std::vector<double> OrthantTable::normalized() const {
    std::vector<double> p(entries_.size());
    const double s = sum();
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = s > 0.0 ? entries_[i].probability / s : 1.0 / static_cast<double>(p.size());
    }
    return p;
}

double OrthantTable::max_error() const {
    double e = 0.0;
    for (const auto& x : entries_) {
        e = std::max(e, x.error_estimate);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Factorization

namespace {

constexpr double kDeterministicTol = 1e-10;  // relative variance below which a dimension is fixed
constexpr double kNegativeTol = 1e-8;        // admissible negative variance (jitter scale)

enum class Pivot { largest_variance, genz_priority };

/// Gaussian split into deterministic dimensions and a (pivoted, possibly
/// rank-deficient) Cholesky factor of the random ones.
struct Factorization {
    std::size_t k = 0;
    std::vector<int> fixed_sign;      // per original dim: 0 random, else forced sign
    std::vector<std::size_t> order;   // original dims of random part, pivot order
    Eigen::VectorXd mean;             // random part, pivot order
    Eigen::MatrixXd L;                // lower triangular, zero diagonal past rank
    Eigen::MatrixXd cov;              // random part, pivot order
    std::size_t rank = 0;

    std::size_t q() const { return order.size(); }
};

void check_distribution(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw ContractError("orthant: covariance shape does not match mean dimension");
    }
    if (mean.size() == 0) {
        throw ContractError("orthant: dimension must be at least 1");
    }
    if (!mean.allFinite() || !cov.allFinite()) {
        throw ContractError("orthant: mean and covariance must be finite");
    }
}

Factorization factorize(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Pivot pivot) {
    check_distribution(mean, cov);
    Factorization f;
    f.k = static_cast<std::size_t>(mean.size());
    f.fixed_sign.assign(f.k, 0);

    const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
    const double det_tol = kDeterministicTol * scale;
    std::vector<std::size_t> random_dims;
    for (std::size_t i = 0; i < f.k; ++i) {
        const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        if (v < -kNegativeTol * scale) {
            std::ostringstream msg;
            msg << "orthant: covariance has negative variance " << v << " in dimension " << i;
            throw NumericalError(msg.str());
        }
        if (v <= det_tol) {
            f.fixed_sign[i] = mean(static_cast<Eigen::Index>(i)) > 0.0 ? 1 : -1;
        } else {
            random_dims.push_back(i);
        }
    }

    const auto q = static_cast<Eigen::Index>(random_dims.size());
    Eigen::VectorXd m(q);
    Eigen::MatrixXd S(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
        m(a) = mean(static_cast<Eigen::Index>(random_dims[a]));
        for (Eigen::Index b = 0; b < q; ++b) {
            S(a, b) = cov(static_cast<Eigen::Index>(random_dims[a]), static_cast<Eigen::Index>(random_dims[b]));
        }
    }

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(q));
    for (Eigen::Index a = 0; a < q; ++a) {
        perm[static_cast<std::size_t>(a)] = a;
    }
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd residual = S.diagonal();   // conditional variances, original positions
    Eigen::VectorXd cond_mean = m;             // conditional means under expected truncation
    std::size_t rank = 0;

    auto swap_pos = [&](Eigen::Index a, Eigen::Index b) {
        if (a == b) {
            return;
        }
        std::swap(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
        L.row(a).swap(L.row(b));
    };

    for (Eigen::Index j = 0; j < q; ++j) {
        // choose pivot among positions j..q-1 (perm maps position -> original random index)
        Eigen::Index best = -1;
        double best_key = 0.0;
        for (Eigen::Index p = j; p < q; ++p) {
            const Eigen::Index o = perm[static_cast<std::size_t>(p)];
            const double var = residual(o);
            if (var <= det_tol) {
                continue;
            }
            double key = 0.0;
            if (pivot == Pivot::largest_variance) {
                key = -var;
            } else {
                key = normal_cdf(cond_mean(o) / std::sqrt(var));
            }
            if (best < 0 || key < best_key) {
                best = p;
                best_key = key;
            }
        }
        if (best < 0) {
            break;  // remaining dimensions are linear functions of the earlier ones
        }
        swap_pos(j, best);
        const Eigen::Index o = perm[static_cast<std::size_t>(j)];
        const double d = std::sqrt(residual(o));
        L(j, j) = d;
        for (Eigen::Index p = j + 1; p < q; ++p) {
            const Eigen::Index op = perm[static_cast<std::size_t>(p)];
            double v = S(op, o);
            for (Eigen::Index t = 0; t < j; ++t) {
                v -= L(p, t) * L(j, t);
            }
            L(p, j) = v / d;
        }
        double ez = 0.0;
        if (pivot == Pivot::genz_priority) {
            // Expected value of the standardized variable truncated to (-c/d, inf).
            const double a = -cond_mean(o) / d;
            const double tail = normal_cdf(-a);
            ez = tail > 1e-300 ? normal_pdf(a) / tail : -a;
        }
        for (Eigen::Index p = j + 1; p < q; ++p) {
            const Eigen::Index op = perm[static_cast<std::size_t>(p)];
            residual(op) -= L(p, j) * L(p, j);
            cond_mean(op) += L(p, j) * ez;
        }
        ++rank;
    }
    for (Eigen::Index p = static_cast<Eigen::Index>(rank); p < q; ++p) {
        const double v = residual(perm[static_cast<std::size_t>(p)]);
        if (v < -kNegativeTol * scale) {
            throw NumericalError("orthant: covariance is not positive semi-definite");
        }
    }

    f.rank = rank;
    f.L = L;
    f.mean.resize(q);
    f.cov.resize(q, q);
    f.order.resize(static_cast<std::size_t>(q));
    for (Eigen::Index a = 0; a < q; ++a) {
        const Eigen::Index oa = perm[static_cast<std::size_t>(a)];
        f.order[static_cast<std::size_t>(a)] = random_dims[static_cast<std::size_t>(oa)];
        f.mean(a) = m(oa);
        for (Eigen::Index b = 0; b < q; ++b) {
            f.cov(a, b) = S(oa, perm[static_cast<std::size_t>(b)]);
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Closed forms and quadrature (random part of dimension <= 3), pivot order masks

struct PartialTable {
    std::vector<double> prob;   // indexed by mask over pivot positions
    std::vector<double> error;
    bool converged = true;
    std::size_t points = 0;
};

void bivariate_table(double m0, double s0, double m1, double s1, double rho, double* out) {
    // out indexed by mask bit0 = sign(y0)>0, bit1 = sign(y1)>0
    const double a = m0 / s0;
    const double b = m1 / s1;
    const double pp = bivariate_normal_upper(-a, -b, rho);
    const double p0 = normal_cdf(a);
    const double p1 = normal_cdf(b);
    out[3] = pp;
    out[1] = std::max(0.0, p0 - pp);
    out[2] = std::max(0.0, p1 - pp);
    out[0] = std::max(0.0, 1.0 - p0 - p1 + pp);
}

struct GaussLegendre {
    std::vector<double> x;  // nodes on [0, 1]
    std::vector<double> w;
};

GaussLegendre make_gauss_legendre(std::size_t n) {
    GaussLegendre g;
    g.x.resize(n);
    g.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * static_cast<double>(j) - 1.0) * z * p2 - (static_cast<double>(j) - 1.0) * p3) /
                     static_cast<double>(j);
            }
            dp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) {
                break;
            }
        }
        g.x[i] = 0.5 * (1.0 - z);
        g.w[i] = 1.0 / ((1.0 - z * z) * dp * dp);  // half of the [-1,1] weight
    }
    return g;
}

const GaussLegendre& gauss_legendre32() {
    static const GaussLegendre g = make_gauss_legendre(32);
    return g;
}

/// Trivariate orthant table: the first variable is integrated in normal space
/// with a composite 32-point Gauss-Legendre rule on each side of its zero
/// crossing, the remaining pair in closed form. Mass beyond 9 sd is ignored
/// (below 1e-18).
void trivariate_rule(const Factorization& f, std::size_t panels, std::array<double, 8>& out) {
    constexpr double kZ = 9.0;
    const auto& g = gauss_legendre32();
    const auto& L = f.L;
    const double m1 = f.mean(1), m2 = f.mean(2);
    const double s1 = L(1, 1);
    const double s2 = std::sqrt(L(2, 1) * L(2, 1) + L(2, 2) * L(2, 2));
    const double rho = s2 > 0.0 ? L(2, 1) / s2 : 0.0;
    const double c = -f.mean(0) / L(0, 0);
    out.fill(0.0);
    std::array<double, 4> inner{};
    for (const int side : {1, -1}) {
        const double lo = side > 0 ? std::max(c, -kZ) : -kZ;
        const double hi = side > 0 ? kZ : std::min(c, kZ);
        if (hi <= lo) {
            continue;
        }
        const std::uint32_t b0 = side > 0 ? 1U : 0U;
        const double h = (hi - lo) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            for (std::size_t i = 0; i < g.x.size(); ++i) {
                const double z0 = lo + h * (static_cast<double>(p) + g.x[i]);
                const double wt = h * g.w[i] * std::exp(-0.5 * z0 * z0) / std::sqrt(2.0 * std::numbers::pi);
                bivariate_table(m1 + L(1, 0) * z0, s1, m2 + L(2, 0) * z0, s2, rho, inner.data());
                for (std::uint32_t r = 0; r < 4; ++r) {
                    out[b0 | (r << 1)] += wt * inner[r];
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Randomized lattice QMC (Genz sequential conditioning)

namespace {

constexpr std::array<double, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

struct QmcResult {
    std::vector<double> prob;
    std::vector<double> error;
    bool converged = true;
    std::size_t points = 0;
};

/// Evaluates the sequential-conditioning integrand at one point for either all
/// leaves (target < 0) or a single positive-orthant path (target >= 0 unused mask).
class ConditioningIntegrand {
public:
    ConditioningIntegrand(const Factorization& f, bool all_leaves)
        : f_(f), q_(f.q()), all_(all_leaves) {}

    void accumulate(const double* w, double* acc) const {
        std::array<double, 16> z{};
        if (all_) {
            descend(0, 1.0, 0U, w, z, acc);
        } else {
            path(w, z, acc);
        }
    }

private:
    double conditional_mean(std::size_t j, const std::array<double, 16>& z) const {
        double c = f_.mean(static_cast<Eigen::Index>(j));
        for (std::size_t t = 0; t < j && t < f_.rank; ++t) {
            c += f_.L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) * z[t];
        }
        return c;
    }

    void descend(std::size_t j, double prob, std::uint32_t mask, const double* w, std::array<double, 16>& z,
                 double* acc) const {
        const double c = conditional_mean(j, z);
        const double s = j < f_.rank ? f_.L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) : 0.0;
        const bool last = j + 1 == q_;
        if (s <= 0.0) {
            const std::uint32_t bit = c > 0.0 ? (1U << j) : 0U;
            z[j] = 0.0;
            if (last) {
                acc[mask | bit] += prob;
            } else {
                descend(j + 1, prob, mask | bit, w, z, acc);
            }
            return;
        }
        const double p_plus = normal_cdf(c / s);
        const double p_minus = normal_cdf(-c / s);
        if (last) {
            acc[mask | (1U << j)] += prob * p_plus;
            acc[mask] += prob * p_minus;
            return;
        }
        if (p_plus > 0.0) {
            z[j] = -safe_quantile(w[j] * p_plus);
            descend(j + 1, prob * p_plus, mask | (1U << j), w, z, acc);
        }
        if (p_minus > 0.0) {
            z[j] = safe_quantile(w[j] * p_minus);
            descend(j + 1, prob * p_minus, mask, w, z, acc);
        }
    }

    void path(const double* w, std::array<double, 16>& z, double* acc) const {
        double prob = 1.0;
        for (std::size_t j = 0; j < q_; ++j) {
            const double c = conditional_mean(j, z);
            const double s = j < f_.rank ? f_.L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) : 0.0;
            if (s <= 0.0) {
                if (c <= 0.0) {
                    return;
                }
                z[j] = 0.0;
                continue;
            }
            const double p_plus = normal_cdf(c / s);
            prob *= p_plus;
            if (prob <= 0.0) {
                return;
            }
            if (j + 1 < q_) {
                z[j] = -safe_quantile(w[j] * p_plus);
            }
        }
        acc[0] += prob;
    }

    const Factorization& f_;
    std::size_t q_;
    bool all_;
};

QmcResult lattice_qmc(const Factorization& f, bool all_leaves, const OrthantOptions& opt) {
    const std::size_t q = f.q();
    const std::size_t dims = q > 1 ? q - 1 : 1;
    const std::size_t outputs = all_leaves ? (std::size_t{1} << q) : 1;
    const std::size_t shifts = std::max<std::size_t>(opt.shifts, 2);

    std::array<double, 16> alpha{};
    for (std::size_t j = 0; j < dims; ++j) {
        const double s = std::sqrt(kPrimes[j]);
        alpha[j] = s - std::floor(s);
    }
    Rng rng(opt.seed);
    std::vector<std::array<double, 16>> delta(shifts);
    for (auto& d : delta) {
        for (std::size_t j = 0; j < dims; ++j) {
            d[j] = uniform01(rng);
        }
    }

    ConditioningIntegrand integrand(f, all_leaves);
    std::vector<double> sums(shifts * outputs, 0.0);
    const std::size_t per_shift_cap = std::max<std::size_t>(opt.max_points / shifts, 16);
    std::size_t n_done = 0;
    std::size_t n_target = std::min<std::size_t>(128, per_shift_cap);

    QmcResult res;
    res.prob.assign(outputs, 0.0);
    res.error.assign(outputs, 0.0);
    std::array<double, 16> w{};
    for (;;) {
        for (std::size_t s = 0; s < shifts; ++s) {
            double* acc = sums.data() + s * outputs;
            for (std::size_t i = n_done + 1; i <= n_target; ++i) {
                for (std::size_t j = 0; j < dims; ++j) {
                    double x = static_cast<double>(i) * alpha[j] + delta[s][j];
                    x -= std::floor(x);
                    w[j] = std::abs(2.0 * x - 1.0);
                }
                integrand.accumulate(w.data(), acc);
            }
        }
        n_done = n_target;

        double worst = 0.0;
        for (std::size_t o = 0; o < outputs; ++o) {
            double mean = 0.0;
            for (std::size_t s = 0; s < shifts; ++s) {
                mean += sums[s * outputs + o] / static_cast<double>(n_done);
            }
            mean /= static_cast<double>(shifts);
            double var = 0.0;
            for (std::size_t s = 0; s < shifts; ++s) {
                const double d = sums[s * outputs + o] / static_cast<double>(n_done) - mean;
                var += d * d;
            }
            var /= static_cast<double>(shifts * (shifts - 1));
            res.prob[o] = mean;
            res.error[o] = 3.0 * std::sqrt(var);
            worst = std::max(worst, res.error[o]);
        }
        if (worst <= opt.tolerance) {
            break;
        }
        if (n_done >= per_shift_cap) {
            res.converged = false;
            break;
        }
        n_target = std::min(per_shift_cap, n_done * 2);
    }
    res.points = n_done * shifts;
    return res;
}

/// Orthant probabilities of the random part in pivot-order masks.
PartialTable random_part_table(const Factorization& f, const OrthantOptions& opt) {
    const std::size_t q = f.q();
    PartialTable t;
    t.prob.assign(std::size_t{1} << q, 0.0);
    t.error.assign(std::size_t{1} << q, 0.0);
    if (q == 0) {
        t.prob[0] = 1.0;
        return t;
    }
    if (q == 1) {
        const double a = f.mean(0) / std::sqrt(f.cov(0, 0));
        t.prob[1] = normal_cdf(a);
        t.prob[0] = normal_cdf(-a);
        return t;
    }
    if (q == 2) {
        const double s0 = std::sqrt(f.cov(0, 0));
        const double s1 = std::sqrt(f.cov(1, 1));
        bivariate_table(f.mean(0), s0, f.mean(1), s1, f.cov(0, 1) / (s0 * s1), t.prob.data());
        return t;
    }
    if (q == 3 && f.rank == 3) {
        // panels double until two levels agree far below any QMC tolerance
        const double target = std::min(opt.tolerance, 1e-12);
        std::array<double, 8> coarse{}, fine{};
        std::size_t panels = 2;
        trivariate_rule(f, panels, coarse);
        double err = 0.0;
        for (panels = 4; panels <= 128; panels *= 2) {
            trivariate_rule(f, panels, fine);
            err = 0.0;
            for (std::size_t i = 0; i < 8; ++i) {
                err = std::max(err, std::abs(fine[i] - coarse[i]));
            }
            if (err <= target) {
                break;
            }
            coarse = fine;
        }
        if (err <= opt.tolerance) {
            for (std::size_t i = 0; i < 8; ++i) {
                t.prob[i] = std::max(0.0, fine[i]);
                t.error[i] = err;
            }
            return t;
        }
        // fall through: poorly resolved integrand
    }
    auto qmc = lattice_qmc(f, true, opt);
    t.prob = std::move(qmc.prob);
    t.error = std::move(qmc.error);
    t.converged = qmc.converged;
    t.points = qmc.points;
    return t;
}

std::uint32_t original_mask(const Factorization& f, std::uint32_t pivot_mask) {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < f.k; ++i) {
        if (f.fixed_sign[i] > 0) {
            m |= 1U << i;
        }
    }
    for (std::size_t j = 0; j < f.q(); ++j) {
        if ((pivot_mask >> j) & 1U) {
            m |= 1U << f.order[j];
        }
    }
    return m;
}

}  // namespace

OrthantTable orthant_probabilities_all(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                       const OrthantOptions& options) {
    const auto k = static_cast<std::size_t>(mean.size());
    if (k > options.max_dimension || k > 16) {
        std::ostringstream msg;
        msg << "orthant: dimension " << k << " exceeds configured maximum " << options.max_dimension;
        throw CapacityError(msg.str());
    }
    const Factorization f = factorize(mean, cov, Pivot::largest_variance);
    const PartialTable part = random_part_table(f, options);

    std::vector<OrthantEstimate> entries(std::size_t{1} << k);
    for (auto& e : entries) {
        e.probability = 0.0;
        e.error_estimate = 0.0;
        e.converged = part.converged;
        e.points = part.points;
    }
    for (std::uint32_t pm = 0; pm < part.prob.size(); ++pm) {
        auto& e = entries[original_mask(f, pm)];
        e.probability = std::clamp(part.prob[pm], 0.0, 1.0);
        e.error_estimate = part.error[pm];
    }
    return OrthantTable(k, std::move(entries));
}

OrthantTable orthant_probabilities_all(const RelevanceDistribution& dist, const OrthantOptions& options) {
    return orthant_probabilities_all(dist.mean, dist.cov, options);
}

OrthantEstimate orthant_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                    const RelevanceConfig& config, const OrthantOptions& options) {
    check_distribution(mean, cov);
    const auto k = static_cast<std::size_t>(mean.size());
    if (config.size() != k) {
        throw ContractError("orthant: relevance config length does not match distribution dimension");
    }
    // Reflect to the positive orthant.
    Eigen::VectorXd m = mean;
    Eigen::MatrixXd S = cov;
    for (std::size_t i = 0; i < k; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (config[i] < 0) {
            m(ii) = -m(ii);
            S.row(ii) *= -1.0;
            S.col(ii) *= -1.0;
        }
    }
    const Factorization f = factorize(m, S, Pivot::genz_priority);
    for (std::size_t i = 0; i < k; ++i) {
        // deterministic dims: reflected mean must be strictly positive; an exact
        // zero means "irrelevant", so a zero-mean dim only counts for sign -1.
        if (f.fixed_sign[i] != 0) {
            const double orig = mean(static_cast<Eigen::Index>(i));
            const int orig_sign = orig > 0.0 ? 1 : -1;
            if (orig_sign != config[i]) {
                return OrthantEstimate{0.0, 0.0, true, 0};
            }
        }
    }
    if (f.q() == 0) {
        return OrthantEstimate{1.0, 0.0, true, 0};
    }
    if (f.q() <= 3) {
        const Factorization g = factorize(f.mean, f.cov, Pivot::largest_variance);
        const PartialTable t = random_part_table(g, options);
        const std::uint32_t all = (std::uint32_t{1} << g.q()) - 1U;
        return OrthantEstimate{std::clamp(t.prob[all], 0.0, 1.0), t.error[all], t.converged, t.points};
    }
    const QmcResult r = lattice_qmc(f, false, options);
    OrthantEstimate e;
    e.probability = std::clamp(r.prob[0], 0.0, 1.0);
    e.error_estimate = r.error[0];
    e.converged = r.converged;
    e.points = r.points;
    return e;
}

OrthantEstimate orthant_probability(const RelevanceDistribution& dist, const RelevanceConfig& config,
                                    const OrthantOptions& options) {
    return orthant_probability(dist.mean, dist.cov, config, options);
}

}  // namespace ital
