// Command line front end: ingest, tune, bench, report, serve.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ital/benchmark.hpp"
#include "ital/dataset.hpp"
#include "ital/http_api.hpp"
#include "ital/service.hpp"
#include "ital/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ital;

namespace {

std::vector<double> numbers(const std::string& text, std::size_t expected, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw ConfigError(flag + ": '" + item + "' is not a number");
        }
    }
    if (out.size() != expected) {
        throw ConfigError(flag + " expects " + std::to_string(expected) + " comma separated numbers");
    }
    return out;
}

/// "--kernel sigma_var,sigma_ls,sigma_noise" or a JSON file written by `tune`.
std::optional<KernelConfig> parse_kernel(const std::string& arg) {
    if (arg.empty()) {
        return std::nullopt;
    }
    KernelConfig k;
    if (fs::exists(arg)) {
        std::ifstream in(arg);
        json j = json::parse(in);
        const json& c = j.contains("best") ? j.at("best") : j;
        k = {c.at("sigma_var").get<double>(), c.at("sigma_ls").get<double>(), c.at("sigma_noise").get<double>()};
    } else {
        const auto v = numbers(arg, 3, "--kernel");
        k = {v[0], v[1], v[2]};
    }
    k.validate();
    return k;
}

/// Default when no kernel is given: the middle of the tuning grid.
KernelConfig default_kernel(const Dataset& ds, std::uint64_t seed) {
    const auto g = default_grid(ds, seed);
    return {g.sigma_var[g.sigma_var.size() / 2], g.sigma_ls[g.sigma_ls.size() / 2],
            g.sigma_noise[g.sigma_noise.size() / 2]};
}

json kernel_json(const KernelConfig& k) {
    return {{"sigma_var", k.sigma_var}, {"sigma_ls", k.sigma_ls}, {"sigma_noise", k.sigma_noise}};
}

void print_summary(const Dataset& ds) {
    const auto s = summarize(ds);
    std::cout << "dataset " << ds.name << ": " << s.samples << " samples, " << s.dimensions << " dims, "
              << s.train << " train / " << s.test << " test\n";
    for (const auto& [label, count] : s.label_counts) {
        std::cout << "  " << label << ": " << count << "\n";
    }
}

struct Common {
    std::string dataset;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string kernel;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive retrieval with information-theoretic active learning"};
    app.require_subcommand(1);

    Common common;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate, scale and store a dataset");
    std::string ingest_out;
    bool synthetic = false;
    BlobOptions blobs;
    std::string name;
    ingest->add_option("--dataset", common.dataset, "Manifest (.json) or features file (.csv/.bin)");
    ingest->add_flag("--synthetic", synthetic, "Generate seeded Gaussian blobs instead of reading a file");
    ingest->add_option("--classes", blobs.classes)->check(CLI::PositiveNumber);
    ingest->add_option("--per-class", blobs.per_class)->check(CLI::PositiveNumber);
    ingest->add_option("--dim", blobs.dim)->check(CLI::PositiveNumber);
    ingest->add_option("--spread", blobs.spread)->check(CLI::PositiveNumber);
    ingest->add_option("--test-fraction", blobs.test_fraction);
    ingest->add_option("--name", name, "Dataset name for --synthetic");
    ingest->add_option("--seed", common.seed);
    ingest->add_option("--out", ingest_out, "Directory receiving <name>.csv and <name>.json");

    // tune
    auto* tune = app.add_subcommand("tune", "Cross-validated kernel hyper-parameter search");
    TuningOptions topt;
    std::string tune_out;
    tune->add_option("--dataset", common.dataset)->required();
    tune->add_option("--seed", common.seed);
    tune->add_option("--folds", topt.folds)->check(CLI::PositiveNumber);
    tune->add_option("--max-samples", topt.max_samples)->check(CLI::PositiveNumber);
    tune->add_option("--out", tune_out, "Write the result as JSON (usable as --kernel)");

    // bench
    auto* bench = app.add_subcommand("bench", "Run simulated retrieval tasks for several strategies");
    BenchmarkConfig bc;
    std::vector<std::string> strategies;
    std::vector<std::string> behaviors;
    std::string user_model;
    std::vector<std::uint64_t> seeds;
    std::string bench_out;
    bench->add_option("--dataset", common.dataset)->required();
    bench->add_option("--strategy", strategies, "Strategy name; repeatable (default: all)");
    bench->add_option("--rounds", bc.rounds);
    bench->add_option("--batch-size", bc.batch_size)->check(CLI::PositiveNumber);
    bench->add_option("--queries-per-class", bc.queries_per_class)->check(CLI::PositiveNumber);
    bench->add_option("--behavior", behaviors, "Simulated user p_label,p_mistake; repeatable");
    bench->add_option("--user-model", user_model, "User model assumed by ital: p_label,p_mistake");
    bench->add_option("--seed", seeds, "Task seed; repeatable");
    bench->add_option("--out", bench_out, "Output directory (resumable)");
    bench->add_option("--pool-size", bc.selection.pool_size, "Candidate sub-sample for ital (0 = all)");
    bench->add_option("--workers", common.workers);
    bench->add_option("--kernel", common.kernel, "sigma_var,sigma_ls,sigma_noise or tune output");

    // report
    auto* report = app.add_subcommand("report", "Re-aggregate stored task results");
    std::string report_out;
    std::string title = "learning curves";
    report->add_option("--out", report_out, "Benchmark output directory")->required();
    report->add_option("--title", title);

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the relevance feedback HTTP API");
    std::vector<std::string> serve_datasets;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string journal = "sessions";
    std::string static_dir;
    std::size_t max_k = 10;
    std::size_t default_k = 4;
    serve->add_option("--dataset", serve_datasets, "Dataset to load; repeatable")->required();
    serve->add_option("--kernel", common.kernel);
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--journal", journal, "Session journal directory");
    serve->add_option("--static", static_dir, "Directory served at /");
    serve->add_option("--batch-size", default_k)->check(CLI::PositiveNumber);
    serve->add_option("--max-batch-size", max_k)->check(CLI::PositiveNumber);
    serve->add_option("--workers", common.workers);
    serve->add_option("--seed", common.seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            Dataset ds;
            if (synthetic) {
                blobs.seed = common.seed;
                ds = make_blobs(blobs);
                if (!name.empty()) {
                    ds.name = name;
                }
            } else {
                if (common.dataset.empty()) {
                    throw ConfigError("ingest: give --dataset or --synthetic");
                }
                ds = load_dataset(common.dataset);
            }
            ds.validate();
            print_summary(ds);
            if (!ingest_out.empty()) {
                save_dataset(ds, ingest_out);
                std::cout << "wrote " << (fs::path(ingest_out) / (ds.name + ".json")).string() << "\n";
            }
            return 0;
        }

        if (*tune) {
            const Dataset ds = load_dataset(common.dataset);
            topt.seed = common.seed;
            const auto grid = default_grid(ds, common.seed);
            const auto res = tune_kernel(ds, grid, topt);
            for (const auto& w : res.warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            std::printf("best sigma_var=%g sigma_ls=%g sigma_noise=%g cv_map=%.6f (%zu configurations, %zu folds)\n",
                        res.best.sigma_var, res.best.sigma_ls, res.best.sigma_noise, res.score, res.visited.size(),
                        res.folds);
            if (!tune_out.empty()) {
                json visited = json::array();
                for (const auto& [c, v] : res.visited) {
                    json e = kernel_json(c);
                    e["score"] = v;
                    visited.push_back(e);
                }
                std::ofstream(tune_out) << json{{"best", kernel_json(res.best)},
                                                {"score", res.score},
                                                {"folds", res.folds},
                                                {"visited", visited}}
                                               .dump(1)
                                        << "\n";
            }
            return 0;
        }

        if (*bench) {
            const Dataset ds = load_dataset(common.dataset);
            bc.strategies.clear();
            if (strategies.empty()) {
                bc.strategies = all_strategies();
            }
            for (const auto& s : strategies) {
                const auto id = parse_strategy(s);
                if (std::find(bc.strategies.begin(), bc.strategies.end(), id) == bc.strategies.end()) {
                    bc.strategies.push_back(id);
                }
            }
            bc.behaviors.clear();
            for (const auto& b : behaviors) {
                const auto v = numbers(b, 2, "--behavior");
                bc.behaviors.push_back({v[0], v[1]});
            }
            if (bc.behaviors.empty()) {
                bc.behaviors.push_back({});
            }
            if (!user_model.empty()) {
                const auto v = numbers(user_model, 2, "--user-model");
                bc.user_model = {v[0], v[1]};
            }
            bc.seeds = seeds.empty() ? std::vector<std::uint64_t>{0} : seeds;
            bc.workers = common.workers;
            const auto k = parse_kernel(common.kernel);
            bc.kernel = k ? *k : default_kernel(ds, bc.seeds.front());
            if (!bench_out.empty()) {
                bc.out_dir = bench_out;
            }
            const auto res = run_benchmark(ds, bc);
            if (res.reused) {
                std::cerr << "reused " << res.reused << " stored task results\n";
            }
            for (const auto& b : res.behaviors) {
                std::printf("behavior p_label=%g p_mistake=%g\n", b.behavior.p_label, b.behavior.p_mistake);
                std::printf("  %-12s %8s %5s %6s\n", "strategy", "aulc", "rank", "tasks");
                for (const auto& s : b.strategies) {
                    std::printf("  %-12s %8.4f %5zu %6zu%s\n", s.strategy.c_str(), s.aulc, s.rank, s.tasks,
                                s.failures ? " (failures)" : "");
                }
            }
            if (!bench_out.empty()) {
                std::ofstream(fs::path(bench_out) / "kernel.json") << kernel_json(bc.kernel).dump(1) << "\n";
            }
            return 0;
        }

        if (*report) {
            const auto records = load_records(report_out);
            std::vector<std::string> order;
            std::vector<UserBehavior> bs;
            for (const auto& r : records) {
                if (std::find(order.begin(), order.end(), r.strategy) == order.end()) {
                    order.push_back(r.strategy);
                }
                if (r.behavior >= bs.size()) {
                    bs.resize(r.behavior + 1);
                }
                bs[r.behavior] = r.behavior_params;
            }
            // Keep the canonical strategy order rather than file order.
            std::vector<std::string> canonical;
            for (const auto id : all_strategies()) {
                if (std::find(order.begin(), order.end(), to_string(id)) != order.end()) {
                    canonical.push_back(to_string(id));
                }
            }
            const auto summaries = aggregate(records, canonical, bs);
            write_reports(summaries, report_out, title);
            for (const auto& b : summaries) {
                std::printf("behavior p_label=%g p_mistake=%g\n", b.behavior.p_label, b.behavior.p_mistake);
                for (const auto& s : b.strategies) {
                    std::printf("  %-12s %8.4f (%zu)\n", s.strategy.c_str(), s.aulc, s.rank);
                }
            }
            return 0;
        }

        if (*serve) {
            ServiceOptions so;
            so.journal_dir = journal;
            so.default_k = default_k;
            so.max_k = max_k;
            so.selection.workers = common.workers;
            so.selection.seed = common.seed;
            FeedbackService service(so);
            const auto k = parse_kernel(common.kernel);
            for (const auto& path : serve_datasets) {
                Dataset ds = load_dataset(path);
                const KernelConfig kc = k ? *k : default_kernel(ds, common.seed);
                std::cerr << "loaded " << ds.name << " (" << ds.size() << " samples)\n";
                service.add_dataset(std::move(ds), kc);
            }
            std::vector<std::string> warnings;
            const auto restored = service.restore_sessions(&warnings);
            for (const auto& w : warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            if (restored) {
                std::cerr << "restored " << restored << " sessions\n";
            }
            HttpApi api(service, static_dir);
            const int bound = api.bind(host, port);
            std::cerr << "listening on http://" << host << ":" << bound << "\n";
            static HttpApi* running = &api;
            std::signal(SIGINT, [](int) { running->stop(); });
            std::signal(SIGTERM, [](int) { running->stop(); });
            api.listen();
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IngestError& e) {
        std::cerr << "ingest error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
