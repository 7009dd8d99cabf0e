#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/planner.hpp"
#include "reportsmith/profiler.hpp"

using namespace reportsmith;
using nlohmann::json;
using planner::InsightPlan;

namespace {

RawTable project(const RawTable& raw, const std::vector<std::string>& names) {
    RawTable out = raw;
    out.columns.clear();
    for (const auto& n : names)
        for (const auto& c : raw.columns)
            if (c.name == n) out.columns.push_back(c);
    return out;
}

struct World {
    ingest::DatasetSchema schema;
    profiler::StatisticalProfile profile;
};

World world(const std::vector<std::string>& names = {}) {
    auto raw = ingest::load_dataset(testing::sample_csv().string());
    auto l = testing::load(names.empty() ? raw : project(raw, names));
    return {l.schema, profiler::build_profile(l.table, profiler::HintRuleSet::defaults())};
}

InsightPlan plan(Task task, std::vector<planner::PlanField> fields, std::vector<std::string> grounding = {"x"}) {
    InsightPlan p;
    p.insight_id = "p";
    p.title = "t";
    p.question = "q";
    p.task = task;
    p.fields = std::move(fields);
    p.grounding = std::move(grounding);
    return p;
}

std::vector<std::string> tasks(const std::vector<InsightPlan>& plans) {
    std::vector<std::string> out;
    for (const auto& p : plans) out.emplace_back(to_string(p.task));
    return out;
}

json plans_json(const std::vector<InsightPlan>& plans) {
    json j = json::array();
    for (const auto& p : plans) j.push_back(json::parse(p.to_json().dump()));
    return j;
}

}  // namespace

TEST_SUITE("planner") {
    TEST_CASE("validate_plan") {
        auto w = world();
        CHECK_NOTHROW(planner::validate_plan(plan(Task::trend, {{"Year", Role::time}, {"Downloads", Role::measure}}), w.schema));
        CHECK_THROWS_AS(planner::validate_plan(plan(Task::comparison, {{"Conference", Role::measure}}), w.schema), PlanInvalid);
        CHECK_THROWS_AS(planner::validate_plan(plan(Task::trend, {}), w.schema), PlanInvalid);
        CHECK_THROWS_AS(planner::validate_plan(plan(Task::trend, {{"Downloads", Role::time}}), w.schema), PlanInvalid);
        CHECK_THROWS_AS(planner::validate_plan(plan(Task::trend, {{"Nope", Role::measure}}), w.schema), PlanInvalid);
        CHECK_THROWS_AS(planner::validate_plan(plan(Task::trend, {{"Year", Role::time}}, {}), w.schema), PlanInvalid);
        try {
            planner::validate_plan(plan(Task::trend, {{"Nope", Role::measure}, {"Conference", Role::measure}}), w.schema);
            FAIL("expected PlanInvalid");
        } catch (const PlanInvalid& e) {
            CHECK(e.violations().size() == 2);
        }
    }

    TEST_CASE("plans parse leniently but reject unknown tasks") {
        auto p = InsightPlan::from_json(json::parse(R"({"task": "trend", "fields": [{"name": "Year", "role": "time"}],
                                                        "grounding": ["trend.v1:Year"]})"));
        CHECK_FALSE(p.insight_id.empty());
        CHECK_FALSE(p.title.empty());
        CHECK_THROWS_AS(InsightPlan::from_json(json::parse(R"({"task": "forecast", "fields": []})")), PlanInvalid);
    }

    TEST_CASE("intent bounds") {
        CHECK_THROWS_AS((planner::Intent{"g", 0, {}}).validate(), Error);
        CHECK_THROWS_AS((planner::Intent{"g", 13, {}}).validate(), Error);
        CHECK_NOTHROW((planner::Intent{"g", 12, {}}).validate());
    }

    TEST_CASE("fallback order follows the scoring table") {
        // time + measures + strong pair, no discrete dimension:
        // trend 15, correlation 8 + 4|r|, distribution 6 (skewed measure).
        auto w = world({"Year", "Downloads", "Citations"});
        auto plans = planner::fallback_plan({"g", 3, {}}, w.schema, w.profile);
        CHECK(tasks(plans) == std::vector<std::string>{"trend", "correlation", "distribution"});
        double r = 0;
        for (const auto& p : w.profile.pairs)
            if (p.kind == profiler::PairKind::pearson_r) r = p.value;
        CHECK(8 + 4 * std::abs(r) < 15);
        CHECK(8 + 4 * std::abs(r) > 6);
        CHECK(plans_json(plans) == plans_json(planner::fallback_plan({"g", 3, {}}, w.schema, w.profile)));
    }

    TEST_CASE("fallback on the sample dataset") {
        auto w = world();
        auto plans = planner::fallback_plan({"g", 5, {}}, w.schema, w.profile);
        REQUIRE(plans.size() == 5);
        CHECK(tasks(plans)[0] == "trend");
        CHECK(tasks(plans)[1] == "correlation");
        CHECK(tasks(plans)[2] == "comparison");
        for (const auto& p : plans) CHECK_NOTHROW(planner::validate_plan(p, w.schema));
    }

    TEST_CASE("scarce candidates give fewer plans and a warning span") {
        auto w = world({"Conference"});
        auto plans = planner::fallback_plan({"g", 3, {}}, w.schema, w.profile);
        CHECK(tasks(plans) == std::vector<std::string>{"distribution"});

        auto store = std::make_shared<trace::TraceStore>("t");
        auto root = trace::Span::root(store, "plan");
        auto out = planner::plan_insights({"g", 3, {}}, w.schema, w.profile, nullptr, root);
        root.close();
        CHECK(out.plans.size() == 1);
        bool warned = false;
        for (const auto& s : store->spans()) warned = warned || s.stage_name == "warning:insight_shortfall";
        CHECK(warned);
    }

    TEST_CASE("constant single column cannot be planned") {
        auto l = testing::load(testing::raw_from_csv("k\n5\n5\n5\n"));
        auto prof = profiler::build_profile(l.table, profiler::HintRuleSet::defaults());
        CHECK_THROWS_WITH_AS(planner::fallback_plan({"g", 3, {}}, l.schema, prof), doctest::Contains("InsufficientFields"),
                             Error);
    }

    TEST_CASE("stub gateway without fixture equals fallback") {
        testing::TempDir tmp;
        auto w = world();
        auto gw = testing::stub_gateway(tmp.path);
        auto span = trace::Span::disabled();
        auto out = planner::plan_insights({"g", 3, {}}, w.schema, w.profile, gw.get(), span);
        CHECK(out.used_fallback);
        CHECK(plans_json(out.plans) == plans_json(planner::fallback_plan({"g", 3, {}}, w.schema, w.profile)));
    }

    TEST_CASE("scripted ReAct session produces the fixture plans") {
        testing::TempDir tmp;
        auto w = world();
        planner::Intent intent{"g", 2, {}};
        std::vector<json> script{
            json::parse(R"({"action": "query_profile", "query": {"kind": "facet_candidates"}})"),
            json::parse(R"({"action": "query_profile", "query": {"kind": "top_correlations", "n": 3}})"),
            json::parse(R"({"action": "final", "plans": [
                {"insight_id": "dl-cit", "title": "Downloads and citations", "question": "Related?", "task": "correlation",
                 "fields": [{"name": "Downloads", "role": "measure"}, {"name": "Citations", "role": "measure"},
                            {"name": "Conference", "role": "dimension"}],
                 "grounding": ["corr.v1:Downloads,Citations", "facet.v1:Conference"]},
                {"insight_id": "by-conf", "title": "By conference", "question": "Which venue?", "task": "comparison",
                 "fields": [{"name": "Conference", "role": "dimension"}, {"name": "Citations", "role": "measure"}],
                 "grounding": ["facet.v1:Conference"]}]})"),
        };
        planner::PlanOutcome out;
        testing::script_fixtures(tmp.path, llm::AgentRole::planner, script, [&](llm::Gateway& gw) {
            auto span = trace::Span::disabled();
            out = planner::plan_insights(intent, w.schema, w.profile, &gw, span);
        });
        auto gw = testing::stub_gateway(tmp.path);
        auto store = std::make_shared<trace::TraceStore>("t");
        auto root = trace::Span::root(store, "plan");
        out = planner::plan_insights(intent, w.schema, w.profile, gw.get(), root);
        root.close();
        CHECK_FALSE(out.used_fallback);
        CHECK(out.tool_calls == 2);
        REQUIRE(out.plans.size() == 2);
        CHECK(out.plans[0].insight_id == "dl-cit");
        CHECK(out.plans[1].task == Task::comparison);
        int tools = 0;
        for (const auto& s : store->spans()) tools += s.stage_name == "tool:query_profile";
        CHECK(tools == 2);
    }

    TEST_CASE("invalid plans are retried twice, then the fallback is used") {
        testing::TempDir tmp;
        auto w = world();
        planner::Intent intent{"g", 1, {}};
        auto bad = json::parse(R"({"action": "final", "plans": [
            {"insight_id": "x", "title": "x", "question": "x", "task": "trend",
             "fields": [{"name": "Yeer", "role": "time"}], "grounding": ["trend.v1:Year"]}]})");
        planner::PlanOutcome out;
        testing::script_fixtures(tmp.path, llm::AgentRole::planner, {bad, bad, bad}, [&](llm::Gateway& gw) {
            auto span = trace::Span::disabled();
            out = planner::plan_insights(intent, w.schema, w.profile, &gw, span);
        });
        auto gw = testing::stub_gateway(tmp.path);
        auto span = trace::Span::disabled();
        out = planner::plan_insights(intent, w.schema, w.profile, gw.get(), span);
        CHECK(out.retries == 2);
        CHECK(out.used_fallback);
        CHECK(plans_json(out.plans) == plans_json(planner::fallback_plan(intent, w.schema, w.profile)));
    }

    TEST_CASE("ungrounded plans are rejected") {
        testing::TempDir tmp;
        auto w = world();
        planner::Intent intent{"g", 1, {}};
        // Grounding names a real hint, but no query ever returned it.
        auto ungrounded = json::parse(R"({"action": "final", "plans": [
            {"insight_id": "x", "title": "x", "question": "x", "task": "trend",
             "fields": [{"name": "Year", "role": "time"}, {"name": "Downloads", "role": "measure"}],
             "grounding": ["trend.v1:Year"]}]})");
        planner::PlanOutcome out;
        testing::script_fixtures(tmp.path, llm::AgentRole::planner, {ungrounded, ungrounded, ungrounded},
                                 [&](llm::Gateway& gw) {
                                     auto span = trace::Span::disabled();
                                     out = planner::plan_insights(intent, w.schema, w.profile, &gw, span);
                                 });
        CHECK(out.used_fallback);
        CHECK(out.retries == 2);
    }

    TEST_CASE("tool-call budget is capped at 8") {
        testing::TempDir tmp;
        auto w = world();
        planner::Intent intent{"g", 1, {}};
        std::vector<json> script(10, json::parse(R"({"action": "query_profile", "query": {"kind": "temporal_fields"}})"));
        script.push_back(json::parse(R"({"action": "final", "plans": [
            {"insight_id": "x", "title": "x", "question": "x", "task": "trend",
             "fields": [{"name": "Year", "role": "time"}, {"name": "Downloads", "role": "measure"}],
             "grounding": ["trend.v1:Year"]}]})"));
        planner::PlanOutcome out;
        testing::script_fixtures(tmp.path, llm::AgentRole::planner, script, [&](llm::Gateway& gw) {
            auto span = trace::Span::disabled();
            out = planner::plan_insights(intent, w.schema, w.profile, &gw, span);
        });
        auto gw = testing::stub_gateway(tmp.path);
        auto store = std::make_shared<trace::TraceStore>("t");
        auto root = trace::Span::root(store, "plan");
        out = planner::plan_insights(intent, w.schema, w.profile, gw.get(), root);
        root.close();
        CHECK(out.tool_calls == 8);
        CHECK_FALSE(out.used_fallback);
        int tools = 0;
        for (const auto& s : store->spans()) tools += s.stage_name == "tool:query_profile";
        CHECK(tools == 8);
    }

    TEST_CASE("insight ids are slugs of task and fields") {
        CHECK(planner::make_insight_id(Task::trend, {{"Year", Role::time}, {"Citations", Role::measure}}) ==
              "trend-year-citations");
    }
}
