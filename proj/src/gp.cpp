#include "ital/gp.hpp"

#include <algorithm>
#include <sstream>

namespace ital {
namespace {

constexpr double kJitterScale = 1e-8;

void check_labels(std::span<const Index> ids, std::span<const int> labels, Index n, const char* op) {
    if (ids.size() != labels.size()) {
        throw ContractError(std::string(op) + ": ids and labels differ in length");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= n) {
            std::ostringstream msg;
            msg << op << ": index " << ids[i] << " out of range [0, " << n << ")";
            throw ContractError(msg.str());
        }
        if (labels[i] != 1 && labels[i] != -1) {
            std::ostringstream msg;
            msg << op << ": label of index " << ids[i] << " must be -1 or +1, got " << labels[i];
            throw ContractError(msg.str());
        }
    }
    IdList sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
        std::ostringstream msg;
        msg << op << ": duplicate index " << *dup;
        throw ContractError(msg.str());
    }
}

std::string describe(std::span<const Index> ids) {
    std::ostringstream s;
    s << "[";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        s << (i ? ", " : "") << ids[i];
    }
    s << "]";
    return s.str();
}

/// Inverse of a symmetric positive definite matrix; retries once with jitter.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M, double jitter, std::span<const Index> ids,
                            const char* what) {
    const auto n = M.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd J = M;
        J.diagonal().array() += jitter;
        llt.compute(J);
        if (llt.info() != Eigen::Success) {
            throw NumericalError(std::string(what) + " is singular after jitter; indices " +
                                 describe(ids));
        }
    }
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    return 0.5 * (inv + inv.transpose());
}

Eigen::VectorXd to_vector(std::span<const int> labels) {
    Eigen::VectorXd y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return y;
}

}  // namespace

bool GPState::contains(Index id) const {
    return std::binary_search(sorted_ids_.begin(), sorted_ids_.end(), id);
}

void GPState::index_ids() {
    sorted_ids_ = ids_;
    std::sort(sorted_ids_.begin(), sorted_ids_.end());
}

GPState gp_fit(const KernelMatrix& kernel, std::span<const Index> labeled_ids, std::span<const int> labels) {
    if (labeled_ids.empty()) {
        throw ContractError("gp_fit: labeled set must not be empty");
    }
    check_labels(labeled_ids, labels, kernel.size(), "gp_fit");

    GPState s;
    s.ids_.assign(labeled_ids.begin(), labeled_ids.end());
    s.labels_ = to_vector(labels);
    const Eigen::MatrixXd K = kernel.block(labeled_ids, labeled_ids);
    s.inverse_ = spd_inverse(K, kJitterScale * kernel.config().prior_variance(), labeled_ids,
                             "gp_fit: labeled sub-kernel");
    s.weights_ = s.inverse_ * s.labels_;
    s.index_ids();
    return s;
}

GPState gp_update(const GPState& state, const KernelMatrix& kernel, std::span<const Index> new_ids,
                  std::span<const int> new_labels) {
    if (new_ids.empty()) {
        if (!new_labels.empty()) {
            throw ContractError("gp_update: ids and labels differ in length");
        }
        return state;
    }
    if (state.empty()) {
        return gp_fit(kernel, new_ids, new_labels);
    }
    check_labels(new_ids, new_labels, kernel.size(), "gp_update");
    for (const Index id : new_ids) {
        if (state.contains(id)) {
            std::ostringstream msg;
            msg << "gp_update: index " << id << " is already labeled";
            throw ContractError(msg.str());
        }
    }

    const auto l = static_cast<Eigen::Index>(state.size());
    const auto k = static_cast<Eigen::Index>(new_ids.size());
    const Eigen::MatrixXd B = kernel.block(state.labeled_ids(), new_ids);  // l x k
    const Eigen::MatrixXd C = kernel.block(new_ids, new_ids);              // k x k
    const Eigen::MatrixXd AB = state.inverse_gram() * B;
    const Eigen::MatrixXd S = C - B.transpose() * AB;
    const Eigen::MatrixXd S_inv =
        spd_inverse(0.5 * (S + S.transpose()), kJitterScale * kernel.config().prior_variance(), new_ids,
                    "gp_update: Schur complement");
    const Eigen::MatrixXd AB_S = AB * S_inv;

    GPState s;
    s.ids_ = state.labeled_ids();
    s.ids_.insert(s.ids_.end(), new_ids.begin(), new_ids.end());
    s.labels_.resize(l + k);
    s.labels_ << state.labels(), to_vector(new_labels);

    Eigen::MatrixXd inv(l + k, l + k);
    inv.topLeftCorner(l, l) = state.inverse_gram() + AB_S * AB.transpose();
    inv.topRightCorner(l, k) = -AB_S;
    inv.bottomLeftCorner(k, l) = -AB_S.transpose();
    inv.bottomRightCorner(k, k) = S_inv;
    s.inverse_ = 0.5 * (inv + inv.transpose());
    s.weights_ = s.inverse_ * s.labels_;
    s.index_ids();
    return s;
}

RelevanceDistribution gp_predict(const GPState& state, const KernelMatrix& kernel,
                                 std::span<const Index> query_ids) {
    for (const Index q : query_ids) {
        if (q >= kernel.size()) {
            throw ContractError("gp_predict: query index out of range");
        }
    }
    RelevanceDistribution out;
    out.ids.assign(query_ids.begin(), query_ids.end());
    const Eigen::MatrixXd Kqq = kernel.block(query_ids, query_ids);
    if (state.empty()) {
        out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(query_ids.size()));
        out.cov = Kqq;
        return out;
    }
    const Eigen::MatrixXd Kql = kernel.block(query_ids, state.labeled_ids());
    out.mean = Kql * state.weights();
    const Eigen::MatrixXd cov = Kqq - Kql * state.inverse_gram() * Kql.transpose();
    out.cov = 0.5 * (cov + cov.transpose());
    return out;
}

MarginalPrediction gp_predict_marginal(const GPState& state, const KernelMatrix& kernel,
                                       std::span<const Index> query_ids) {
    MarginalPrediction out;
    const auto m = static_cast<Eigen::Index>(query_ids.size());
    out.variance = Eigen::VectorXd::Constant(m, kernel.config().diagonal());
    if (state.empty()) {
        out.mean = Eigen::VectorXd::Zero(m);
        return out;
    }
    const Eigen::MatrixXd Klq = kernel.block(state.labeled_ids(), query_ids);  // l x m
    out.mean = Klq.transpose() * state.weights();
    const Eigen::MatrixXd V = state.inverse_gram() * Klq;
    out.variance -= (Klq.array() * V.array()).colwise().sum().transpose().matrix();
    out.variance = out.variance.cwiseMax(0.0);
    return out;
}

Eigen::VectorXd gp_predict_mean(const GPState& state, const KernelMatrix& kernel,
                                std::span<const Index> query_ids) {
    if (state.empty()) {
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(query_ids.size()));
    }
    const Eigen::MatrixXd Klq = kernel.block(state.labeled_ids(), query_ids);
    return Klq.transpose() * state.weights();
}

PoolPosterior::PoolPosterior(const GPState& state, const KernelMatrix& kernel, IdList pool)
    : kernel_(&kernel), pool_(std::move(pool)) {
    const auto m = static_cast<Eigen::Index>(pool_.size());
    variance_ = Eigen::VectorXd::Constant(m, kernel.config().diagonal());
    if (state.empty()) {
        mean_ = Eigen::VectorXd::Zero(m);
        k_lp_.resize(0, m);
        v_.resize(0, m);
        return;
    }
    k_lp_ = kernel.block(state.labeled_ids(), pool_);
    v_ = state.inverse_gram() * k_lp_;
    mean_ = k_lp_.transpose() * state.weights();
    variance_ -= (k_lp_.array() * v_.array()).colwise().sum().transpose().matrix();
    variance_ = variance_.cwiseMax(0.0);
}

double PoolPosterior::covariance(std::size_t a, std::size_t b) const {
    if (a == b) {
        return variance_(static_cast<Eigen::Index>(a));
    }
    const double prior = (*kernel_)(pool_[a], pool_[b]);
    if (k_lp_.rows() == 0) {
        return prior;
    }
    return prior - k_lp_.col(static_cast<Eigen::Index>(a)).dot(v_.col(static_cast<Eigen::Index>(b)));
}

RelevanceDistribution PoolPosterior::joint(std::span<const std::size_t> positions) const {
    RelevanceDistribution out;
    const auto b = static_cast<Eigen::Index>(positions.size());
    out.ids.reserve(positions.size());
    out.mean.resize(b);
    out.cov.resize(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const std::size_t pi = positions[static_cast<std::size_t>(i)];
        out.ids.push_back(pool_[pi]);
        out.mean(i) = mean_(static_cast<Eigen::Index>(pi));
        out.cov(i, i) = variance_(static_cast<Eigen::Index>(pi));
        for (Eigen::Index j = 0; j < i; ++j) {
            const double c = covariance(pi, positions[static_cast<std::size_t>(j)]);
            out.cov(i, j) = c;
            out.cov(j, i) = c;
        }
    }
    return out;
}

}  // namespace ital
