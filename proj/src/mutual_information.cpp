#include "ital/mutual_information.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <sstream>

namespace ital {
namespace {

/// Compresses the bits of `mask` that lie outside `answered` into a dense index.
std::uint32_t rest_index(std::uint32_t mask, std::uint32_t answered, std::size_t k) {
    std::uint32_t out = 0;
    std::uint32_t bit = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if ((answered >> i) & 1U) {
            continue;
        }
        if ((mask >> i) & 1U) {
            out |= 1U << bit;
        }
        ++bit;
    }
    return out;
}

std::vector<Eigen::Index> dims_of(std::uint32_t mask, std::size_t k, bool inside) {
    std::vector<Eigen::Index> d;
    for (std::size_t i = 0; i < k; ++i) {
        if ((((mask >> i) & 1U) != 0) == inside) {
            d.push_back(static_cast<Eigen::Index>(i));
        }
    }
    return d;
}

/// Gaussian conditioning of the batch on exact values at the answered entries.
/// Equivalent to gp_update with those labels followed by gp_predict on the rest.
class Conditioner {
public:
    Conditioner(const RelevanceDistribution& d, std::uint32_t answered) : k_(d.size()) {
        a_ = dims_of(answered, k_, true);
        r_ = dims_of(answered, k_, false);
        const auto na = static_cast<Eigen::Index>(a_.size());
        const auto nr = static_cast<Eigen::Index>(r_.size());
        Eigen::MatrixXd Saa(na, na), Sra(nr, na), Srr(nr, nr);
        mu_a_.resize(na);
        mu_r_.resize(nr);
        for (Eigen::Index i = 0; i < na; ++i) {
            mu_a_(i) = d.mean(a_[i]);
            for (Eigen::Index j = 0; j < na; ++j) {
                Saa(i, j) = d.cov(a_[i], a_[j]);
            }
        }
        for (Eigen::Index i = 0; i < nr; ++i) {
            mu_r_(i) = d.mean(r_[i]);
            for (Eigen::Index j = 0; j < na; ++j) {
                Sra(i, j) = d.cov(r_[i], a_[j]);
            }
            for (Eigen::Index j = 0; j < nr; ++j) {
                Srr(i, j) = d.cov(r_[i], r_[j]);
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(Saa);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd J = Saa;
            J.diagonal().array() += 1e-8 * std::max(1.0, Saa.diagonal().maxCoeff());
            llt.compute(J);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("mutual information: covariance of answered entries is singular");
            }
        }
        gain_ = llt.solve(Sra.transpose()).transpose();  // Sra Saa^-1
        cov_ = Srr - gain_ * Sra.transpose();
        cov_ = 0.5 * (cov_ + cov_.transpose());
    }

    std::vector<double> table(std::uint32_t answered_positive, const OrthantOptions& opt) const {
        if (r_.empty()) {
            return {1.0};
        }
        Eigen::VectorXd s(static_cast<Eigen::Index>(a_.size()));
        for (std::size_t i = 0; i < a_.size(); ++i) {
            s(static_cast<Eigen::Index>(i)) = (answered_positive >> a_[i]) & 1U ? 1.0 : -1.0;
        }
        const Eigen::VectorXd m = mu_r_ + gain_ * (s - mu_a_);
        return orthant_probabilities_all(m, cov_, opt).normalized();
    }

private:
    std::size_t k_;
    std::vector<Eigen::Index> a_, r_;
    Eigen::VectorXd mu_a_, mu_r_;
    Eigen::MatrixXd gain_, cov_;
};

double clamp_log(double p, double floor) { return std::log(std::clamp(p, floor, 1.0)); }

}  // namespace

InformationTerms information_terms(const RelevanceDistribution& batch, const UserModelParams& params,
                                   const MutualInformationOptions& opt, bool keep_feedbacks) {
    params.validate();
    const std::size_t k = batch.size();
    if (k == 0) {
        throw ContractError("mutual information: batch must not be empty");
    }
    InformationTerms out;
    out.prior = orthant_probabilities_all(batch.mean, batch.cov, opt.orthant).normalized();
    out.entropy = entropy(out.prior, opt.floor);
    const auto& prior = out.prior;
    const std::uint32_t full = (std::uint32_t{1} << k) - 1U;

    if (params.is_perfect() && !keep_feedbacks) {
        // Only f = r has nonzero probability and then P(r | f) = 1.
        out.mutual_information = out.entropy;
        return out;
    }

    const double pl = params.p_label;
    const double pm = params.p_mistake;
    double mi = 0.0;
    std::vector<double> marginal(std::size_t{1} << k);
    std::vector<std::vector<double>> cond(std::size_t{1} << k);

    for (std::uint32_t A = 0; A <= full; ++A) {
        const auto na = static_cast<int>(std::popcount(A));
        const double pi_a = std::pow(pl, na) * std::pow(1.0 - pl, static_cast<int>(k) - na);
        if (pi_a < opt.prune) {
            continue;
        }
        // Marginal prior of the answered entries.
        std::fill(marginal.begin(), marginal.end(), 0.0);
        for (std::uint32_t R = 0; R <= full; ++R) {
            marginal[R & A] += prior[R];
        }
        // Posterior relevance tables of the GP updated with labels S on A.
        std::optional<Conditioner> conditioner;
        if (A != 0) {
            conditioner.emplace(batch, A);
        }
        for (std::uint32_t S = A;; S = (S - 1U) & A) {
            cond[S] = A == 0 ? prior : conditioner->table(S, opt.orthant);
            if (S == 0) {
                break;
            }
        }

        for (std::uint32_t F = A;; F = (F - 1U) & A) {
            // Likelihood of feedback F (signs on A) when the answered entries are truly S.
            auto likelihood = [&](std::uint32_t S) {
                const auto wrong = static_cast<int>(std::popcount((S ^ F) & A));
                return std::pow(1.0 - pm, na - wrong) * std::pow(pm, wrong);
            };
            double z = 0.0;
            for (std::uint32_t S = A;; S = (S - 1U) & A) {
                z += marginal[S] * likelihood(S);
                if (S == 0) {
                    break;
                }
            }
            if (z > 0.0) {
                FeedbackPosterior fp;
                if (keep_feedbacks) {
                    fp.feedback.resize(k);
                    for (std::size_t i = 0; i < k; ++i) {
                        fp.feedback[i] = (A >> i) & 1U ? ((F >> i) & 1U ? 1 : -1) : 0;
                    }
                    fp.probability = pi_a * z;
                    fp.posterior.assign(std::size_t{1} << k, 0.0);
                }
                // the answers are taken at face value: R_A = F after the update
                for (std::uint32_t R = 0; R <= full; ++R) {
                    const double post = (R & A) == F ? cond[F][rest_index(R, A, k)] : 0.0;
                    if (keep_feedbacks) {
                        fp.posterior[R] = post;
                    }
                    if (prior[R] <= 0.0) {
                        continue;
                    }
                    const double pf = pi_a * likelihood(R & A);
                    if (pf < opt.prune) {
                        continue;
                    }
                    mi += prior[R] * pf * (clamp_log(post, opt.floor) - clamp_log(prior[R], opt.floor));
                }
                if (keep_feedbacks) {
                    out.feedbacks.push_back(std::move(fp));
                }
            }
            if (F == 0) {
                break;
            }
        }
    }
    out.mutual_information = mi;
    return out;
}

double mutual_information(const RelevanceDistribution& batch, const UserModelParams& params,
                          const MutualInformationOptions& options) {
    return information_terms(batch, params, options, false).mutual_information;
}

double joint_entropy(const RelevanceDistribution& batch, const OrthantOptions& options, double floor) {
    const auto p = orthant_probabilities_all(batch.mean, batch.cov, options).normalized();
    return entropy(p, floor);
}

double approximate_mutual_information(const GPState& state, const KernelMatrix& kernel,
                                      std::span<const Index> batch_ids, const UserModelParams& params,
                                      const MutualInformationOptions& options) {
    if (batch_ids.empty()) {
        throw ContractError("mutual information: batch must not be empty");
    }
    IdList sorted(batch_ids.begin(), batch_ids.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ContractError("mutual information: batch ids must be distinct");
    }
    for (const Index id : batch_ids) {
        if (id >= kernel.size()) {
            throw ContractError("mutual information: batch id out of range");
        }
        if (state.contains(id)) {
            std::ostringstream msg;
            msg << "mutual information: batch id " << id << " is already labeled";
            throw ContractError(msg.str());
        }
    }
    try {
        return mutual_information(gp_predict(state, kernel, batch_ids), params, options);
    } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << e.what() << " (batch";
        for (const Index id : batch_ids) {
            msg << ' ' << id;
        }
        msg << ")";
        throw NumericalError(msg.str());
    }
}

}  // namespace ital
