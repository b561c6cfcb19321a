#pragma once

#include <condition_variable>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ital/dataset.hpp"
#include "ital/features.hpp"
#include "ital/strategies.hpp"

namespace ital {

struct ServiceOptions {
    /// Session journals live here; empty disables persistence.
    std::filesystem::path journal_dir;
    std::size_t default_k = 4;
    std::size_t max_k = 10;
    SelectionOptions selection{};
    StrategyParams params{};
};

struct DatasetInfo {
    std::string name;
    Index n = 0;
    Index d = 0;
    bool has_images = false;
};

struct CreateSessionRequest {
    std::string dataset;
    IdList query_ids;
    IdList negative_ids;
    std::size_t k = 0;  // 0 selects the service default
    StrategyId strategy = StrategyId::ital;
    UserModelParams user{};
    std::size_t pool_size = 0;
};

enum class CandidateStatus { ready, computing, failed };
std::string to_string(CandidateStatus s);

/// A sample as presented to the client.
struct SampleView {
    Index id = 0;
    std::string sample_id;
    double score = 0.0;  // current predictive mean
    std::string image_url;  // empty without images
};

struct CandidatesView {
    CandidateStatus status = CandidateStatus::computing;
    std::vector<SampleView> candidates;
    bool exhausted = false;
    std::string error;
};

struct SessionInfo {
    std::string session_id;
    std::string dataset;
    std::size_t round = 0;
    std::size_t k = 0;
    StrategyId strategy = StrategyId::ital;
    UserModelParams user{};
    std::size_t labeled_count = 0;
    std::string status;  // idle, computing, ready, failed
};

struct FeedbackResult {
    std::size_t round = 0;
    std::size_t labeled_count = 0;
    /// The idempotency token matched the previous submission; nothing was applied.
    bool replayed = false;
};

struct HistoryEntry {
    CandidateBatch batch;
    FeedbackVector feedback;
};

/// Live relevance-feedback sessions over preloaded datasets. Calls on one
/// session are serialized by a per-session mutex; sessions are independent.
/// Candidate batches are computed on a background thread.
class FeedbackService {
public:
    explicit FeedbackService(ServiceOptions options = {});
    ~FeedbackService();

    FeedbackService(const FeedbackService&) = delete;
    FeedbackService& operator=(const FeedbackService&) = delete;

    void add_dataset(Dataset dataset, const KernelConfig& kernel);
    std::vector<DatasetInfo> datasets() const;
    const Dataset& dataset(const std::string& name) const;
    const ServiceOptions& options() const { return options_; }

    std::string create_session(const CreateSessionRequest& request);
    SessionInfo session(const std::string& id) const;

    /// Returns the pending batch, starting its computation if needed. With
    /// wait = true blocks until the computation finishes.
    CandidatesView candidates(const std::string& id, bool wait = false);

    /// labels maps candidate ids to -1, 0 or +1; missing candidates count as 0.
    FeedbackResult submit_feedback(const std::string& id, const std::map<Index, int>& labels,
                                   const std::string& idempotency_token = "");

    /// Samples by predictive mean, descending, ties by id. Labeled samples are
    /// left out unless include_labeled.
    std::vector<SampleView> ranking(const std::string& id, std::size_t limit, bool include_labeled = false) const;

    GPState state(const std::string& id) const;
    std::vector<HistoryEntry> history(const std::string& id) const;

    /// Rebuilds sessions from the journal directory; returns how many were
    /// restored. Journals of unknown datasets are skipped.
    std::size_t restore_sessions(std::vector<std::string>* warnings = nullptr);

    std::string image_url(const std::string& dataset, Index id) const;

private:
    struct Loaded;
    struct Session;

    std::shared_ptr<Session> find(const std::string& id) const;
    const Loaded& loaded(const std::string& name) const;
    void start_computation(const std::shared_ptr<Session>& s);
    CandidatesView view_of(const Session& s) const;
    void journal_create(const Session& s);
    void journal_feedback(const Session& s, const HistoryEntry& entry, const std::string& token);

    ServiceOptions options_;
    mutable std::shared_mutex datasets_mutex_;
    std::map<std::string, std::shared_ptr<Loaded>> datasets_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace ital
