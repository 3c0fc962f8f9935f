#pragma once

#include "lmfao/catalog.hpp"
#include "lmfao/executor.hpp"
#include "lmfao/ml/features.hpp"
#include "lmfao/ml/linreg.hpp"
#include "lmfao/planner.hpp"
#include "lmfao/query.hpp"
#include "lmfao/view_generation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lmfao {

enum class AppKind { linreg, cart, rkmeans, batch };
const char *to_string(AppKind kind);

/** Application config (JSON). Common: {"app", "schema": path, "roots": {query: relation}}.
 * linreg {features, label, lambda}; cart {features, label, max_depth, min_leaf};
 * rkmeans {dimensions, k, k_per_dim, seed, lloyd_runs}; batch {queries: [...]} or {batch: file}. */
struct AppConfig
{
    AppKind app = AppKind::batch;
    std::filesystem::path schema; ///< resolved against the config's directory; may be empty
    std::vector<std::string> features;
    std::string label;
    double lambda = 0;
    ml::BgdOptions bgd;
    std::size_t max_depth = 4;
    double min_leaf = 2;
    std::vector<std::string> dimensions;
    std::size_t k = 4;
    std::size_t k_per_dim = 0;
    std::uint64_t seed = 0;
    std::size_t lloyd_runs = 0;
    nlohmann::json queries; ///< batch app
    std::map<std::string, std::string> roots;
};

AppConfig parse_app_config(const std::string &text, const std::filesystem::path &base_dir = {});
AppConfig load_app_config(const std::filesystem::path &path);

/// The first batch an application evaluates: Σ, the CART root node, Rk-means Step 1, or the given queries.
QueryBatch initial_batch(const AppConfig &config, Catalog &catalog);

/// Config roots as node ids, restricted to queries of `batch`.
RootAssignment pinned_roots(const AppConfig &config, const QueryBatch &batch, const Catalog &catalog);

struct PhaseTimes
{
    double view_generation_ms = 0;
    double planning_ms = 0;
    double execution_ms = 0;
    double application_ms = 0;
    std::size_t batches = 0;
    std::size_t queries = 0;
};

/// Runs batches through view generation, planning and execution, keeping the timings and last report.
class BatchEvaluator
{
    ExecOptions options_;
    std::map<std::string, std::string> roots_;

    public:
    PhaseTimes times;
    ExecutionReport last_report;

    BatchEvaluator(ExecOptions options, std::map<std::string, std::string> roots = {})
        : options_(options), roots_(std::move(roots))
    {
    }
    QueryResults operator()(const Catalog &catalog, const QueryBatch &batch);
    ml::BatchRunner runner();
};

struct AppOutcome
{
    nlohmann::json model;
    nlohmann::json report;
};

AppOutcome run_app(const AppConfig &config, Catalog &catalog, const ExecOptions &options = {});

nlohmann::json results_json(const QueryResults &results, const Catalog &catalog);
nlohmann::json report_json(const ExecutionReport &report);
nlohmann::json views_json(const ViewSet &views, const QueryBatch &batch, const Catalog &catalog);
nlohmann::json groups_json(const BatchPlan &plan, const QueryBatch &batch, const Catalog &catalog);

} // namespace lmfao
