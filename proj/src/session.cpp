#include "ital/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ital/random.hpp"

namespace ital {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::ready: return "ready";
        case CandidateStatus::computing: return "computing";
        case CandidateStatus::failed: return "failed";
    }
    return "?";
}

struct FeedbackService::Loaded {
    Dataset data;
    std::shared_ptr<const KernelMatrix> kernel;
    std::unique_ptr<FeatureIndex> features;
};

struct FeedbackService::Session {
    std::string id;
    std::string dataset;
    std::shared_ptr<Loaded> data;
    IdList query_ids;
    IdList negative_ids;
    std::size_t k = 4;
    StrategyId strategy = StrategyId::ital;
    UserModelParams user{};
    std::size_t pool_size = 0;
    std::uint64_t seed = 0;

    mutable std::mutex mutex;
    std::condition_variable done;
    std::shared_ptr<const GPState> gp;
    std::size_t round = 0;
    std::set<Index> shown;  // labeled plus every candidate ever proposed and answered
    std::optional<CandidateBatch> pending;
    bool computing = false;
    std::string error;
    std::future<void> job;
    std::vector<HistoryEntry> history;
    std::string last_token;
    FeedbackResult last_result;
};

namespace {

std::string new_session_id() {
    static std::mutex m;
    static std::random_device rd;
    std::lock_guard lock(m);
    std::uint64_t a = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::uint64_t b = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a), static_cast<unsigned long long>(b));
    return buf;
}

bool valid_session_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

void write_all(int fd, const std::string& data, const fs::path& path) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t w = ::write(fd, data.data() + off, data.size() - off);
        if (w < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error("journal write failed for " + path.string() + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(w);
    }
}

/// Appends one line and forces it to disk.
void append_line(const fs::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (fd < 0) {
        throw Error("cannot open journal " + path.string() + ": " + std::strerror(errno));
    }
    try {
        write_all(fd, line + "\n", path);
        if (::fsync(fd) != 0) {
            throw Error("fsync failed for " + path.string());
        }
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

/// Writes a new file through a temporary and a rename so it appears complete or not at all.
void create_file(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw Error("cannot create journal " + tmp.string() + ": " + std::strerror(errno));
    }
    try {
        write_all(fd, content, tmp);
        if (::fsync(fd) != 0) {
            throw Error("fsync failed for " + tmp.string());
        }
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    fs::rename(tmp, path);
}

std::vector<int> to_labels(std::size_t count, int value) { return std::vector<int>(count, value); }

}  // namespace

FeedbackService::FeedbackService(ServiceOptions options) : options_(std::move(options)) {
    if (options_.default_k == 0 || options_.default_k > options_.max_k) {
        throw ConfigError("service: default batch size must lie in [1, max_k]");
    }
    if (!options_.journal_dir.empty()) {
        fs::create_directories(options_.journal_dir);
    }
}

FeedbackService::~FeedbackService() {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::unique_lock lock(sessions_mutex_);
        for (auto& [id, s] : sessions_) {
            all.push_back(s);
        }
    }
    for (auto& s : all) {
        std::future<void> job;
        {
            std::lock_guard lock(s->mutex);
            job = std::move(s->job);
        }
        if (job.valid()) {
            job.wait();
        }
    }
}

void FeedbackService::add_dataset(Dataset dataset, const KernelConfig& kernel) {
    dataset.validate();
    auto l = std::make_shared<Loaded>();
    l->kernel = compute_kernel_matrix(dataset.features, kernel);
    l->features = std::make_unique<FeatureIndex>(dataset.features);
    l->data = std::move(dataset);
    std::unique_lock lock(datasets_mutex_);
    const std::string name = l->data.name;
    datasets_[name] = std::move(l);
}

std::vector<DatasetInfo> FeedbackService::datasets() const {
    std::shared_lock lock(datasets_mutex_);
    std::vector<DatasetInfo> out;
    for (const auto& [name, l] : datasets_) {
        out.push_back({name, l->data.size(), l->data.dim(), l->data.has_images()});
    }
    return out;
}

const FeedbackService::Loaded& FeedbackService::loaded(const std::string& name) const {
    std::shared_lock lock(datasets_mutex_);
    const auto it = datasets_.find(name);
    if (it == datasets_.end()) {
        throw NotFoundError("unknown dataset '" + name + "'");
    }
    return *it->second;
}

const Dataset& FeedbackService::dataset(const std::string& name) const { return loaded(name).data; }

std::string FeedbackService::image_url(const std::string& dataset, Index id) const {
    const auto& d = loaded(dataset).data;
    if (!d.has_images() || id >= d.size()) {
        return {};
    }
    return "/images/" + dataset + "/" + std::to_string(id);
}

std::shared_ptr<FeedbackService::Session> FeedbackService::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw NotFoundError("unknown session '" + id + "'");
    }
    return it->second;
}

std::string FeedbackService::create_session(const CreateSessionRequest& req) {
    std::shared_ptr<Loaded> data;
    {
        std::shared_lock lock(datasets_mutex_);
        const auto it = datasets_.find(req.dataset);
        if (it == datasets_.end()) {
            throw NotFoundError("unknown dataset '" + req.dataset + "'");
        }
        data = it->second;
    }
    if (req.query_ids.empty()) {
        throw ContractError("session: at least one query id is required");
    }
    const std::size_t k = req.k == 0 ? options_.default_k : req.k;
    if (k > options_.max_k) {
        throw ContractError("session: k exceeds the maximum batch size " + std::to_string(options_.max_k));
    }
    req.user.validate();
    const Index n = data->data.size();
    IdList ids = req.query_ids;
    ids.insert(ids.end(), req.negative_ids.begin(), req.negative_ids.end());
    for (const Index i : ids) {
        if (i >= n) {
            throw NotFoundError("sample " + std::to_string(i) + " does not exist in dataset '" + req.dataset + "'");
        }
    }
    std::vector<int> labels = to_labels(req.query_ids.size(), 1);
    const auto neg = to_labels(req.negative_ids.size(), -1);
    labels.insert(labels.end(), neg.begin(), neg.end());

    auto s = std::make_shared<Session>();
    s->id = new_session_id();
    s->dataset = req.dataset;
    s->data = data;
    s->query_ids = req.query_ids;
    s->negative_ids = req.negative_ids;
    s->k = k;
    s->strategy = req.strategy;
    s->user = req.user;
    s->pool_size = req.pool_size;
    s->seed = derive_seed(fnv1a(s->id), {0x5e55});
    s->gp = std::make_shared<const GPState>(gp_fit(*data->kernel, ids, labels));  // rejects duplicates
    s->shown.insert(ids.begin(), ids.end());
    journal_create(*s);
    std::unique_lock lock(sessions_mutex_);
    sessions_[s->id] = s;
    return s->id;
}

SessionInfo FeedbackService::session(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->mutex);
    SessionInfo info;
    info.session_id = s->id;
    info.dataset = s->dataset;
    info.round = s->round;
    info.k = s->k;
    info.strategy = s->strategy;
    info.user = s->user;
    info.labeled_count = s->gp->size();
    info.status = s->computing ? "computing" : s->pending ? "ready" : !s->error.empty() ? "failed" : "idle";
    return info;
}

CandidatesView FeedbackService::view_of(const Session& s) const {
    CandidatesView v;
    if (s.computing) {
        v.status = CandidateStatus::computing;
        return v;
    }
    if (!s.error.empty()) {
        v.status = CandidateStatus::failed;
        v.error = s.error;
        return v;
    }
    v.status = CandidateStatus::ready;
    if (!s.pending) {
        return v;
    }
    v.exhausted = s.pending->ids.empty();
    const Eigen::VectorXd mean = gp_predict_mean(*s.gp, *s.data->kernel, s.pending->ids);
    for (std::size_t i = 0; i < s.pending->ids.size(); ++i) {
        const Index id = s.pending->ids[i];
        SampleView c;
        c.id = id;
        c.sample_id = s.data->data.sample_ids[id];
        c.score = mean(static_cast<Eigen::Index>(i));
        c.image_url = s.data->data.has_images() ? "/images/" + s.dataset + "/" + std::to_string(id) : "";
        v.candidates.push_back(std::move(c));
    }
    return v;
}

void FeedbackService::start_computation(const std::shared_ptr<Session>& s) {
    // Caller holds s->mutex.
    IdList pool;
    for (Index i = 0; i < s->data->data.size(); ++i) {
        if (!s->shown.count(i)) {
            pool.push_back(i);
        }
    }
    if (pool.empty()) {
        s->pending = CandidateBatch{};
        return;
    }
    s->computing = true;
    s->error.clear();
    const auto gp = s->gp;
    const std::size_t round = s->round;
    SelectionOptions sel = options_.selection;
    sel.pool_size = s->pool_size;
    sel.seed = derive_seed(s->seed, {0x5e1, round});
    const StrategyParams params = options_.params;
    s->job = std::async(std::launch::async, [s, gp, round, sel, params, pool = std::move(pool)] {
        std::optional<CandidateBatch> batch;
        std::string error;
        try {
            const StrategyContext ctx{*gp, *s->data->kernel, *s->data->features, s->user, sel, params,
                                      derive_seed(s->seed, {0x57a, round})};
            batch = select_batch(s->strategy, ctx, pool, s->k);
        } catch (const std::exception& e) {
            error = e.what();
        }
        std::lock_guard lock(s->mutex);
        if (s->round == round) {
            s->pending = std::move(batch);
            s->error = std::move(error);
        }
        s->computing = false;
        s->done.notify_all();
    });
}

CandidatesView FeedbackService::candidates(const std::string& id, bool wait) {
    const auto s = find(id);
    std::unique_lock lock(s->mutex);
    if (!s->pending && !s->computing) {
        start_computation(s);
    }
    if (wait) {
        s->done.wait(lock, [&] { return !s->computing; });
    }
    return view_of(*s);
}

FeedbackResult FeedbackService::submit_feedback(const std::string& id, const std::map<Index, int>& labels,
                                                const std::string& token) {
    const auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (!token.empty() && token == s->last_token) {
        FeedbackResult r = s->last_result;
        r.replayed = true;
        return r;
    }
    if (s->computing) {
        throw ConflictError("candidates are still being computed");
    }
    if (!s->pending || s->pending->ids.empty()) {
        throw ConflictError("no pending candidate batch; request candidates first");
    }
    const auto& batch = *s->pending;
    FeedbackVector f(batch.ids.size(), 0);
    for (const auto& [cid, value] : labels) {
        const auto it = std::find(batch.ids.begin(), batch.ids.end(), cid);
        if (it == batch.ids.end()) {
            throw ContractError("sample " + std::to_string(cid) + " is not in the pending batch");
        }
        if (value < -1 || value > 1) {
            throw ContractError("feedback values must be -1, 0 or 1");
        }
        f[static_cast<std::size_t>(it - batch.ids.begin())] = value;
    }
    IdList new_ids;
    std::vector<int> new_labels;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] != 0) {
            new_ids.push_back(batch.ids[i]);
            new_labels.push_back(f[i]);
        }
    }
    auto next = std::make_shared<const GPState>(gp_update(*s->gp, *s->data->kernel, new_ids, new_labels));
    HistoryEntry entry{batch, f};
    journal_feedback(*s, entry, token);  // durable before the in-memory state changes

    s->gp = std::move(next);
    s->shown.insert(batch.ids.begin(), batch.ids.end());
    s->history.push_back(std::move(entry));
    s->round += 1;
    s->pending.reset();
    s->error.clear();
    FeedbackResult r;
    r.round = s->round;
    r.labeled_count = s->gp->size();
    s->last_token = token;
    s->last_result = r;
    return r;
}

std::vector<SampleView> FeedbackService::ranking(const std::string& id, std::size_t limit,
                                                 bool include_labeled) const {
    const auto s = find(id);
    std::shared_ptr<const GPState> gp;
    {
        std::lock_guard lock(s->mutex);
        gp = s->gp;
    }
    std::vector<SampleView> out;
    if (limit == 0) {
        return out;
    }
    const Index n = s->data->data.size();
    IdList all(n);
    std::iota(all.begin(), all.end(), Index{0});
    const Eigen::VectorXd mean = gp_predict_mean(*gp, *s->data->kernel, all);
    IdList order;
    for (Index i = 0; i < n; ++i) {
        if (include_labeled || !gp->contains(i)) {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return mean(static_cast<Eigen::Index>(a)) > mean(static_cast<Eigen::Index>(b));
    });
    order.resize(std::min(order.size(), limit));
    const bool images = s->data->data.has_images();
    for (const Index i : order) {
        out.push_back({i, s->data->data.sample_ids[i], mean(static_cast<Eigen::Index>(i)),
                       images ? "/images/" + s->dataset + "/" + std::to_string(i) : ""});
    }
    return out;
}

GPState FeedbackService::state(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->mutex);
    return *s->gp;
}

std::vector<HistoryEntry> FeedbackService::history(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->history;
}

void FeedbackService::journal_create(const Session& s) {
    if (options_.journal_dir.empty()) {
        return;
    }
    json j{{"type", "create"},
           {"version", 1},
           {"session_id", s.id},
           {"dataset", s.dataset},
           {"query_ids", s.query_ids},
           {"negative_ids", s.negative_ids},
           {"k", s.k},
           {"strategy", to_string(s.strategy)},
           {"p_label", s.user.p_label},
           {"p_mistake", s.user.p_mistake},
           {"pool_size", s.pool_size},
           {"seed", s.seed}};
    create_file(options_.journal_dir / (s.id + ".jsonl"), j.dump() + "\n");
}

void FeedbackService::journal_feedback(const Session& s, const HistoryEntry& e, const std::string& token) {
    if (options_.journal_dir.empty()) {
        return;
    }
    json j{{"type", "feedback"}, {"round", s.round + 1}, {"batch", e.batch.ids}, {"feedback", e.feedback},
           {"criterion", e.batch.criterion_value}, {"token", token}};
    append_line(options_.journal_dir / (s.id + ".jsonl"), j.dump());
}

std::size_t FeedbackService::restore_sessions(std::vector<std::string>* warnings) {
    if (options_.journal_dir.empty() || !fs::is_directory(options_.journal_dir)) {
        return 0;
    }
    auto warn = [&](const std::string& w) {
        if (warnings) {
            warnings->push_back(w);
        }
    };
    std::size_t restored = 0;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(options_.journal_dir)) {
        if (entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        try {
            std::ifstream in(path);
            std::string line;
            if (!std::getline(in, line)) {
                warn(path.string() + ": empty journal");
                continue;
            }
            const json c = json::parse(line);
            if (c.at("type") != "create") {
                warn(path.string() + ": first record is not a creation record");
                continue;
            }
            const std::string ds = c.at("dataset").get<std::string>();
            std::shared_ptr<Loaded> data;
            {
                std::shared_lock lock(datasets_mutex_);
                const auto it = datasets_.find(ds);
                if (it != datasets_.end()) {
                    data = it->second;
                }
            }
            if (!data) {
                warn(path.string() + ": dataset '" + ds + "' is not loaded");
                continue;
            }
            auto s = std::make_shared<Session>();
            s->id = c.at("session_id").get<std::string>();
            if (!valid_session_id(s->id)) {
                warn(path.string() + ": malformed session id");
                continue;
            }
            s->dataset = ds;
            s->data = data;
            s->query_ids = c.at("query_ids").get<IdList>();
            s->negative_ids = c.at("negative_ids").get<IdList>();
            s->k = c.at("k").get<std::size_t>();
            s->strategy = parse_strategy(c.at("strategy").get<std::string>());
            s->user = {c.at("p_label").get<double>(), c.at("p_mistake").get<double>()};
            s->pool_size = c.value("pool_size", std::size_t{0});
            s->seed = c.at("seed").get<std::uint64_t>();
            IdList ids = s->query_ids;
            ids.insert(ids.end(), s->negative_ids.begin(), s->negative_ids.end());
            std::vector<int> labels = to_labels(s->query_ids.size(), 1);
            const auto neg = to_labels(s->negative_ids.size(), -1);
            labels.insert(labels.end(), neg.begin(), neg.end());
            GPState gp = gp_fit(*data->kernel, ids, labels);
            s->shown.insert(ids.begin(), ids.end());
            while (std::getline(in, line)) {
                if (line.empty()) {
                    continue;
                }
                json r;
                try {
                    r = json::parse(line);
                } catch (const json::exception&) {
                    warn(path.string() + ": ignoring truncated trailing record");
                    break;
                }
                HistoryEntry e;
                e.batch.ids = r.at("batch").get<IdList>();
                e.batch.criterion_value = r.value("criterion", 0.0);
                e.feedback = r.at("feedback").get<FeedbackVector>();
                IdList nid;
                std::vector<int> nl;
                for (std::size_t i = 0; i < e.feedback.size(); ++i) {
                    if (e.feedback[i] != 0) {
                        nid.push_back(e.batch.ids[i]);
                        nl.push_back(e.feedback[i]);
                    }
                }
                gp = gp_update(gp, *data->kernel, nid, nl);
                s->shown.insert(e.batch.ids.begin(), e.batch.ids.end());
                s->last_token = r.value("token", "");
                s->history.push_back(std::move(e));
                s->round += 1;
            }
            s->gp = std::make_shared<const GPState>(std::move(gp));
            s->last_result = {s->round, s->gp->size(), false};
            std::unique_lock lock(sessions_mutex_);
            sessions_[s->id] = s;
            ++restored;
        } catch (const std::exception& e) {
            warn(path.string() + ": " + e.what());
        }
    }
    return restored;
}

}  // namespace ital
