#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/planner.hpp"
#include "reportsmith/trace.hpp"

namespace reportsmith::orchestrator {

enum class LlmMode { stub, http };

struct RunConfig {
    std::string data_uri;
    std::string goal;
    int insights = 3;
    std::optional<std::string> audience;
    std::filesystem::path out_dir = "out";
    LlmMode llm = LlmMode::stub;
    std::optional<std::filesystem::path> rules;
    std::optional<std::filesystem::path> viz_knowledge;
    std::optional<std::filesystem::path> models;
    std::filesystem::path fixtures = "fixtures";
    std::optional<std::filesystem::path> knowledge;
    bool no_cache = false;
    int workers = 4;
    int max_attempts = 3;
    /// insight_id -> replacement plan (surgical re-run).
    std::map<std::string, planner::InsightPlan> plan_overrides;

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

struct StageKey {
    std::string stage_name;
    std::vector<std::string> input_digests;
    std::string config_digest;
    std::string code_version;

    /// SHA-256 over the canonical serialization; input digests are sorted first.
    std::string digest() const;
};

/// Per-stage behaviour version; bump on any change to a stage's output.
std::string code_version(const std::string& stage);

/// Content-keyed stage outputs under `<root>/<key[0..2]>/<key>.json`.
class StageCache {
public:
    explicit StageCache(std::filesystem::path root);
    std::optional<nlohmann::ordered_json> get(const std::string& key) const;
    void put(const std::string& key, const std::string& stage, const nlohmann::ordered_json& output);

private:
    std::filesystem::path root_;
};

struct StageRecord {
    std::string stage;
    std::string insight_id;
    std::string key;
    bool cache_hit = false;
    trace::Status status = trace::Status::ok;
    std::string output_digest;
    std::string span_id;

    nlohmann::ordered_json to_json() const;
};

struct RunResult {
    std::string run_id;
    std::filesystem::path run_dir;
    std::filesystem::path trace_path;
    nlohmann::ordered_json manifest;
    nlohmann::ordered_json report;
    std::vector<StageRecord> stages;
};

/// Executes ingest -> profile -> plan -> per insight {derive, materialize,
/// solve, narrate} -> compose -> emit, honouring the stage cache. Throws
/// only for EmptyDataset, EmptyReport, StoreUnavailable and invalid config.
RunResult run_pipeline(const RunConfig& config);

std::string new_run_id();

/// Loads `<out>/<run_id>/run.json`.
nlohmann::ordered_json load_run_manifest(const std::filesystem::path& out_dir, const std::string& run_id);

/// New run reusing `run_id`'s configuration with one insight's plan replaced.
RunResult replan(const std::filesystem::path& out_dir, const std::string& run_id, const std::string& insight_id,
                 const planner::InsightPlan& plan);

/// Rewrites `<out>/<run_id>/` from the artifact store without running stages.
std::vector<std::filesystem::path> render(const std::filesystem::path& out_dir, const std::string& run_id);

/// Static stage DAG: nodes, edges and the per-insight stages.
nlohmann::ordered_json dag_json();

/// Stage instances downstream of `changed_node` for the insights in the run
/// manifest ("derive:<insight_id>", "compose", ...). Accepts config nodes
/// (dataset, knowledge, rules, viz_knowledge, models, intent, fixtures),
/// stage names and "plan:<insight_id>". Throws UnknownNode.
std::set<std::string> invalidate(const nlohmann::json& run_manifest, const std::string& changed_node);

}  // namespace reportsmith::orchestrator
