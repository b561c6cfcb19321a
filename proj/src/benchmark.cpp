#include "ital/benchmark.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ital/parallel.hpp"
#include "ital/plot.hpp"
#include "ital/random.hpp"

namespace ital {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string unit_key(std::size_t behavior, std::uint64_t seed, std::size_t task, const std::string& strategy) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "b%zu_s%llu_t%04zu_%s", behavior, static_cast<unsigned long long>(seed), task,
                  strategy.c_str());
    return buf;
}

json record_to_json(const TaskRecord& r, const std::string& hash) {
    return json{{"key", r.key},
                {"config_hash", hash},
                {"strategy", r.strategy},
                {"behavior", r.behavior},
                {"p_label", r.behavior_params.p_label},
                {"p_mistake", r.behavior_params.p_mistake},
                {"respect_unnameable", r.behavior_params.respect_unnameable},
                {"seed", r.seed},
                {"task", r.task},
                {"label", r.label},
                {"ap_by_round", r.curve.ap_by_round},
                {"aulc", r.curve.aulc},
                {"aulc_defined", r.curve.aulc_defined},
                {"error", r.error}};
}

TaskRecord record_from_json(const json& j) {
    TaskRecord r;
    r.key = j.at("key").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.behavior = j.at("behavior").get<std::size_t>();
    r.behavior_params.p_label = j.at("p_label").get<double>();
    r.behavior_params.p_mistake = j.at("p_mistake").get<double>();
    r.behavior_params.respect_unnameable = j.value("respect_unnameable", true);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.task = j.at("task").get<std::size_t>();
    r.label = j.at("label").get<std::string>();
    r.curve = make_learning_curve(j.at("ap_by_round").get<std::vector<double>>());
    r.error = j.value("error", "");
    return r;
}

void write_atomically(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << content;
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string config_hash(const BenchmarkConfig& c, const Dataset& ds, const UserBehavior& b) {
    // Feature checksum so a re-ingested dataset invalidates old results.
    double checksum = 0.0;
    const auto& X = *ds.features;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        checksum += X.row(i).sum() * static_cast<double>(i % 97 + 1);
    }
    json j{{"dataset", ds.name},
           {"n", ds.size()},
           {"d", ds.dim()},
           {"checksum", checksum},
           {"queries_per_class", c.queries_per_class},
           {"rounds", c.rounds},
           {"batch_size", c.batch_size},
           {"behavior", {b.p_label, b.p_mistake, b.respect_unnameable}},
           {"user_model", {c.user_model.p_label, c.user_model.p_mistake}},
           {"kernel", {c.kernel.sigma_var, c.kernel.sigma_ls, c.kernel.sigma_noise}},
           {"params",
            {c.params.border_div_lambda, c.params.sud_neighbors, c.params.tcal_fraction, c.params.tcal_iterations,
             c.params.rbmal_beta}},
           {"pool_size", c.selection.pool_size},
           {"orthant",
            {c.selection.mi.orthant.tolerance, c.selection.mi.orthant.max_points, c.selection.mi.orthant.shifts,
             c.selection.mi.orthant.seed}}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

std::vector<BehaviorSummary> aggregate(const std::vector<TaskRecord>& records,
                                       const std::vector<std::string>& strategy_order,
                                       const std::vector<UserBehavior>& behaviors) {
    std::vector<TaskRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    std::vector<BehaviorSummary> out;
    for (std::size_t bi = 0; bi < behaviors.size(); ++bi) {
        BehaviorSummary bs;
        bs.behavior = behaviors[bi];
        for (const auto& name : strategy_order) {
            StrategySummary s;
            s.strategy = name;
            std::vector<std::vector<double>> curves;
            double aulc_sum = 0.0;
            for (const auto& r : sorted) {
                if (r.behavior != bi || r.strategy != name) {
                    continue;
                }
                if (!r.error.empty()) {
                    ++s.failures;
                    continue;
                }
                curves.push_back(r.curve.ap_by_round);
                aulc_sum += r.curve.aulc;
            }
            s.tasks = curves.size();
            s.map_by_round = mean_curve(curves);
            s.aulc = curves.empty() ? 0.0 : aulc_sum / static_cast<double>(curves.size());
            bs.strategies.push_back(std::move(s));
        }
        std::vector<double> aulc;
        for (const auto& s : bs.strategies) {
            aulc.push_back(s.aulc);
        }
        const auto ranks = descending_ranks(aulc);
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            bs.strategies[i].rank = ranks[i];
        }
        out.push_back(std::move(bs));
    }
    return out;
}

void write_reports(const std::vector<BehaviorSummary>& summaries, const fs::path& dir, const std::string& title) {
    for (std::size_t bi = 0; bi < summaries.size(); ++bi) {
        const auto& bs = summaries[bi];
        fs::path sub = dir;
        if (summaries.size() > 1) {
            char name[96];
            std::snprintf(name, sizeof name, "behavior_%g_%g", bs.behavior.p_label, bs.behavior.p_mistake);
            sub /= name;
        }
        fs::create_directories(sub);
        std::ostringstream summary;
        summary.precision(6);
        summary << std::fixed << "strategy,aulc,rank\n";
        std::vector<NamedCurve> curves;
        for (const auto& s : bs.strategies) {
            summary << s.strategy << ',' << s.aulc << ',' << s.rank << '\n';
            std::ostringstream curve;
            curve.precision(6);
            curve << std::fixed << "round,map\n";
            for (std::size_t r = 0; r < s.map_by_round.size(); ++r) {
                curve << r << ',' << s.map_by_round[r] << '\n';
            }
            write_atomically(sub / ("curve_" + s.strategy + ".csv"), curve.str());
            curves.emplace_back(s.strategy, s.map_by_round);
        }
        write_atomically(sub / "summary.csv", summary.str());
        char subtitle[128];
        std::snprintf(subtitle, sizeof subtitle, " (p_label %g, p_mistake %g)", bs.behavior.p_label,
                      bs.behavior.p_mistake);
        write_atomically(sub / "learning_curves.svg", learning_curve_svg(curves, title + subtitle));
    }
}

std::vector<TaskRecord> load_records(const fs::path& dir) {
    std::vector<TaskRecord> out;
    const fs::path tasks = dir / "tasks";
    if (!fs::is_directory(tasks)) {
        throw NotFoundError("no task results below " + dir.string());
    }
    for (const auto& entry : fs::directory_iterator(tasks)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        std::ifstream in(entry.path());
        try {
            out.push_back(record_from_json(json::parse(in)));
        } catch (const json::exception& e) {
            throw IngestError("corrupt task file " + entry.path().string() + ": " + e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
}

BenchmarkResult run_benchmark(const Dataset& ds, const BenchmarkConfig& cfg) {
    if (cfg.strategies.empty() || cfg.behaviors.empty() || cfg.seeds.empty()) {
        throw ConfigError("benchmark: need at least one strategy, behavior and seed");
    }
    cfg.user_model.validate();
    cfg.params.validate();
    for (const auto& b : cfg.behaviors) {
        b.validate();
    }
    const auto kernel = compute_kernel_matrix(ds.features, cfg.kernel);
    const FeatureIndex features(ds.features);
    const Workbench wb{ds, *kernel, features};

    struct Unit {
        TaskRecord record;
        RetrievalTask task;
        StrategyId strategy;
        std::string hash;
    };
    std::vector<Unit> units;
    for (std::size_t bi = 0; bi < cfg.behaviors.size(); ++bi) {
        const std::string hash = config_hash(cfg, ds, cfg.behaviors[bi]);
        for (const auto seed : cfg.seeds) {
            const auto tasks = make_tasks(ds, cfg.queries_per_class, cfg.rounds, cfg.batch_size, seed);
            for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                for (const auto sid : cfg.strategies) {
                    Unit u;
                    u.record.strategy = to_string(sid);
                    u.record.key = unit_key(bi, seed, ti, u.record.strategy);
                    u.record.behavior = bi;
                    u.record.behavior_params = cfg.behaviors[bi];
                    u.record.seed = seed;
                    u.record.task = ti;
                    u.record.label = tasks[ti].relevant_label;
                    u.task = tasks[ti];
                    u.strategy = sid;
                    u.hash = hash;
                    units.push_back(std::move(u));
                }
            }
        }
    }
    if (units.empty()) {
        throw ConfigError("benchmark: the dataset yields no evaluable retrieval tasks");
    }

    fs::path task_dir;
    if (cfg.out_dir) {
        task_dir = *cfg.out_dir / "tasks";
        fs::create_directories(task_dir);
    }
    BenchmarkResult result;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (!cfg.out_dir) {
            todo.push_back(i);
            continue;
        }
        const fs::path file = task_dir / (units[i].record.key + ".json");
        bool reused = false;
        if (fs::exists(file)) {
            try {
                std::ifstream in(file);
                const json j = json::parse(in);
                if (j.value("config_hash", "") == units[i].hash && j.value("error", "").empty()) {
                    units[i].record = record_from_json(j);
                    reused = true;
                }
            } catch (const std::exception&) {
                reused = false;  // unreadable file: recompute
            }
        }
        if (reused) {
            ++result.reused;
        } else {
            todo.push_back(i);
        }
    }

    const std::size_t workers = cfg.workers == 0 ? default_workers() : cfg.workers;
    // Parallelism goes to whole tasks when there are enough of them, else to candidate scoring.
    const std::size_t inner = todo.size() >= workers ? 1 : workers;
    parallel_for(todo.size(), std::min(workers, todo.size()), [&](std::size_t t) {
        Unit& u = units[todo[t]];
        RunConfig rc;
        rc.strategy = u.strategy;
        rc.user_model = cfg.user_model;
        rc.behavior = cfg.behaviors[u.record.behavior];
        rc.params = cfg.params;
        rc.selection = cfg.selection;
        rc.selection.workers = inner;
        rc.seed = derive_seed(u.record.seed, {u.record.task});
        try {
            u.record.curve = run_retrieval_task(wb, u.task, rc);
            u.record.error.clear();
        } catch (const std::exception& e) {
            u.record.error = e.what();
        }
        if (cfg.out_dir) {
            write_atomically(task_dir / (u.record.key + ".json"), record_to_json(u.record, u.hash).dump(1));
        }
    });

    std::vector<std::string> order;
    for (const auto sid : cfg.strategies) {
        order.push_back(to_string(sid));
    }
    for (auto& u : units) {
        result.records.push_back(std::move(u.record));
    }
    std::sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    result.behaviors = aggregate(result.records, order, cfg.behaviors);
    if (cfg.out_dir) {
        write_reports(result.behaviors, *cfg.out_dir, ds.name);
    }
    return result;
}

}  // namespace ital
