#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "reportsmith/error.hpp"
#include "reportsmith/ingest.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/json_util.hpp"
#include "reportsmith/orchestrator.hpp"
#include "reportsmith/profiler.hpp"
#include "reportsmith/trace.hpp"

namespace fs = std::filesystem;
using namespace reportsmith;

namespace {

void print_summary(const orchestrator::RunResult& r) {
    int hits = 0, misses = 0;
    for (const auto& s : r.stages) (s.cache_hit ? hits : misses)++;
    std::cout << "run " << r.run_id << "\n"
              << "  report: " << (r.run_dir / "report.json").string() << "\n"
              << "  trace:  " << r.trace_path.string() << "\n"
              << "  insights: " << r.report.at("insights").size() << ", skipped: " << r.report.at("skipped").size()
              << "\n"
              << "  stages: " << r.stages.size() << " (" << misses << " executed, " << hits << " cached)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reportsmith: automated visual data reports"};
    app.set_config("--config", "reportsmith.toml", "TOML file mirroring the command-line flags");
    app.require_subcommand(1);

    orchestrator::RunConfig cfg;
    std::string llm_mode = "stub";
    std::string rules, viz, models, knowledge;
    std::string fixtures = "fixtures";
    std::string out = "out";

    auto* run = app.add_subcommand("run", "Run the full pipeline");
    run->add_option("--data", cfg.data_uri, "Dataset path (CSV or Parquet)")->required();
    run->add_option("--goal", cfg.goal, "Analysis goal")->required();
    run->add_option("--insights", cfg.insights, "Number of insights")->check(CLI::Range(1, 12));
    run->add_option("--out", out, "Output directory");
    run->add_option("--llm", llm_mode, "LLM backend")->check(CLI::IsMember({"stub", "http"}));
    run->add_option("--rules", rules, "Hint rule file");
    run->add_option("--viz-knowledge", viz, "Chart knowledge base");
    run->add_option("--models", models, "Model routing table");
    run->add_option("--fixtures", fixtures, "Stub fixture directory");
    run->add_option("--knowledge", knowledge, "Code-expansion knowledge directory");
    run->add_option("--audience", cfg.audience, "Audience note");
    run->add_option("--workers", cfg.workers, "Parallel insight workers")->check(CLI::PositiveNumber);
    run->add_flag("--no-cache", cfg.no_cache, "Ignore and do not write the stage cache");

    std::string data;
    auto* profile = app.add_subcommand("profile", "Print the statistical profile of a dataset");
    profile->add_option("--data", data, "Dataset path")->required();
    profile->add_option("--rules", rules, "Hint rule file");

    std::string run_id, insight_id, plan_path;
    auto* replan = app.add_subcommand("replan", "Re-run one insight with a modified plan");
    replan->add_option("--run", run_id, "Run id")->required();
    replan->add_option("--insight", insight_id, "Insight id")->required();
    replan->add_option("--plan", plan_path, "Plan JSON")->required();
    replan->add_option("--out", out, "Output directory");

    auto* render = app.add_subcommand("render", "Re-emit report files of a run from the artifact store");
    render->add_option("--run", run_id, "Run id")->required();
    render->add_option("--out", out, "Output directory");

    auto* trace_cmd = app.add_subcommand("trace", "Print the span tree of a run");
    trace_cmd->add_option("--run", run_id, "Run id")->required();
    trace_cmd->add_option("--insight", insight_id, "Only spans of this insight");
    trace_cmd->add_option("--out", out, "Output directory");

    std::string changed;
    auto* dag = app.add_subcommand("dag", "Print the stage DAG, or what a change would invalidate");
    dag->add_option("--run", run_id, "Run id");
    dag->add_option("--changed", changed, "Changed node, e.g. rules or plan:<insight_id>");
    dag->add_option("--out", out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            cfg.out_dir = out;
            cfg.llm = llm_mode == "http" ? orchestrator::LlmMode::http : orchestrator::LlmMode::stub;
            if (!rules.empty()) cfg.rules = rules;
            if (!viz.empty()) cfg.viz_knowledge = viz;
            if (!models.empty()) cfg.models = models;
            if (!knowledge.empty()) cfg.knowledge = knowledge;
            cfg.fixtures = fixtures;
            print_summary(orchestrator::run_pipeline(cfg));
        } else if (*profile) {
            auto raw = ingest::load_dataset(data);
            auto cleaned = ingest::clean(raw);
            auto table = ingest::apply_schema(cleaned, ingest::refine_fields(raw));
            auto set = rules.empty() ? profiler::HintRuleSet::defaults() : profiler::HintRuleSet::load(rules);
            std::cout << profiler::build_profile(table, set).to_json().dump(2) << "\n";
        } else if (*replan) {
            auto plan = planner::InsightPlan::from_json(nlohmann::json::parse(read_file(plan_path)));
            print_summary(orchestrator::replan(out, run_id, insight_id, plan));
        } else if (*render) {
            for (const auto& p : orchestrator::render(out, run_id)) std::cout << p.string() << "\n";
        } else if (*trace_cmd) {
            auto m = orchestrator::load_run_manifest(out, run_id);
            auto spans = trace::load_jsonl(fs::path(out) / m.at("trace").get<std::string>());
            std::cout << trace::render_tree(spans, insight_id);
        } else if (*dag) {
            if (changed.empty()) {
                std::cout << orchestrator::dag_json().dump(2) << "\n";
            } else {
                if (run_id.empty()) throw Error(ErrorCode::InvalidConfig, "--changed needs --run");
                auto m = orchestrator::load_run_manifest(out, run_id);
                for (const auto& n : orchestrator::invalidate(to_plain(m), changed)) std::cout << n << "\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << "reportsmith: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "reportsmith: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
