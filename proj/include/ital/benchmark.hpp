#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ital/simulation.hpp"

namespace ital {

struct BenchmarkConfig {
    std::vector<StrategyId> strategies{StrategyId::random, StrategyId::ital};
    std::size_t queries_per_class = 5;
    std::size_t rounds = 10;
    std::size_t batch_size = 4;
    std::vector<UserBehavior> behaviors{UserBehavior{}};
    std::vector<std::uint64_t> seeds{0};
    UserModelParams user_model{};
    StrategyParams params{};
    SelectionOptions selection{};
    KernelConfig kernel{};
    /// Concurrent tasks; 0 uses the hardware concurrency.
    std::size_t workers = 0;
    /// Per-task result files are written here and reused on the next run.
    std::optional<std::filesystem::path> out_dir;
};

/// Result of one (behavior, seed, task, strategy) unit.
struct TaskRecord {
    std::string key;
    std::string strategy;
    std::size_t behavior = 0;
    UserBehavior behavior_params{};
    std::uint64_t seed = 0;
    std::size_t task = 0;
    std::string label;
    LearningCurve curve;
    std::string error;  // nonempty when the unit failed
};

struct StrategySummary {
    std::string strategy;
    std::vector<double> map_by_round;
    double aulc = 0.0;  // mean of per-task AULC
    std::size_t rank = 0;
    std::size_t tasks = 0;
    std::size_t failures = 0;
};

struct BehaviorSummary {
    UserBehavior behavior;
    std::vector<StrategySummary> strategies;  // in configured order
};

struct BenchmarkResult {
    std::vector<TaskRecord> records;  // sorted by key
    std::vector<BehaviorSummary> behaviors;
    std::size_t reused = 0;  // records loaded from previous runs
};

/// Fingerprint of every setting that influences a unit's curve.
std::string config_hash(const BenchmarkConfig& config, const Dataset& ds, const UserBehavior& behavior);

BenchmarkResult run_benchmark(const Dataset& ds, const BenchmarkConfig& config);

/// Groups records into per-behavior, per-strategy summaries with ranks.
std::vector<BehaviorSummary> aggregate(const std::vector<TaskRecord>& records,
                                       const std::vector<std::string>& strategy_order,
                                       const std::vector<UserBehavior>& behaviors);

/// Writes curve_<strategy>.csv (round,map), summary.csv (strategy,aulc,rank)
/// and learning_curves.svg; one subdirectory per behavior when there are several.
void write_reports(const std::vector<BehaviorSummary>& summaries, const std::filesystem::path& dir,
                   const std::string& title);

/// Reloads every task file below dir/tasks.
std::vector<TaskRecord> load_records(const std::filesystem::path& dir);

}  // namespace ital
