#include <doctest.h>

#include <fstream>
#include <map>

#include "helpers.hpp"
#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/reporter.hpp"

using namespace reportsmith;
using namespace reportsmith::reporter;
using nlohmann::json;

namespace {

planner::InsightPlan make_plan(Task task, std::vector<planner::PlanField> fields) {
    planner::InsightPlan p;
    p.task = task;
    p.fields = std::move(fields);
    p.insight_id = planner::make_insight_id(task, p.fields);
    p.title = "Title " + p.insight_id;
    p.question = "How about " + p.insight_id + "?";
    p.grounding = {"field_summary:Year"};
    return p;
}

struct Fixture {
    testing::Loaded s = testing::load_sample();
    testing::TempDir tmp;
    publisher::FilesystemStore store{tmp.path / "store"};
    vizrec::Knowledge kb = vizrec::Knowledge::defaults();

    CompletedInsight complete(const planner::InsightPlan& p) {
        auto span = trace::Span::disabled();
        auto out = deriver::derive(p, s.schema, s.table, nullptr, store, nullptr, span);
        REQUIRE(out.derived);
        CompletedInsight c;
        c.plan = p;
        c.derived = *out.derived;
        c.partial = vizrec::build_partial_spec(c.derived, p, profiler::HintRuleSet::defaults());
        c.spec = vizrec::solve(c.partial, kb);
        c.chart_doc = vizrec::to_render_doc(c.spec, c.partial, c.derived.artifact, p.title, kb);
        c.narrative = narrate_insight(p, c.derived, c.spec, nullptr, span);
        c.trace_span_id = "span-" + p.insight_id;
        return c;
    }
};

planner::InsightPlan trend_plan() { return make_plan(Task::trend, {{"Year", Role::time}}); }
planner::InsightPlan comparison_plan() {
    return make_plan(Task::comparison, {{"Conference", Role::dimension}, {"Citations", Role::measure}});
}
planner::InsightPlan correlation_plan() {
    return make_plan(Task::correlation, {{"Downloads", Role::measure}, {"Citations", Role::measure}});
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("reporter") {
    TEST_CASE("stat formatting") {
        CHECK(format_stat(42) == "42");
        CHECK(format_stat(-3) == "-3");
        CHECK(format_stat(3.14159) == "3.14");
        CHECK(format_stat(2.5) == "2.5");
        CHECK(format_stat(0.1 + 0.2) == "0.3");
        CHECK(format_stat(1e6) == "1000000");
    }

    TEST_CASE("uncited number detection") {
        std::vector<Citation> cites{{"min", 12, "12"}, {"r", 0.6391, "0.64"}};
        CHECK(uncited_numbers("Values range from 12 upward; r is 0.64.", cites).empty());
        CHECK(uncited_numbers("r is 0.6 here", cites).empty());
        CHECK(uncited_numbers("Between 12 and 99.", cites) == std::vector<std::string>{"99"});
        // Code spans and identifiers carry no claims.
        CHECK(uncited_numbers("Field `Top10` and col2 and `2024`.", cites).empty());
        auto range = uncited_numbers("Over 2010-2019.", cites);
        CHECK(range == std::vector<std::string>{"2010", "2019"});
    }

    TEST_CASE("trend template cites the per-period counts") {
        Fixture f;
        auto c = f.complete(trend_plan());
        std::map<std::string, int> per_year;
        for (const auto& v : f.s.table.find("Year")->values) per_year[to_text(v)]++;
        int lo = 1 << 30, hi = 0;
        for (const auto& [_, n] : per_year) lo = std::min(lo, n), hi = std::max(hi, n);
        const auto& body = c.narrative.body_markdown;
        CAPTURE(body);
        CHECK(body.find("ranges from " + std::to_string(lo) + " to " + std::to_string(hi) + " across " +
                        std::to_string(per_year.size()) + " periods") != std::string::npos);
        CHECK(c.narrative.source == "template");
        CHECK(uncited_numbers(body, c.narrative.stat_citations).empty());
        CHECK(c.narrative.stat_citations.size() >= 3);
    }

    TEST_CASE("every task template passes the citation check") {
        Fixture f;
        for (auto p : {trend_plan(), comparison_plan(), correlation_plan(),
                       make_plan(Task::distribution, {{"Downloads", Role::measure}}),
                       make_plan(Task::ranking, {{"Conference", Role::dimension}, {"Downloads", Role::measure}}),
                       make_plan(Task::part_to_whole, {{"Award", Role::dimension}}),
                       make_plan(Task::outlier, {{"Downloads", Role::measure}, {"Citations", Role::measure}})}) {
            CAPTURE(p.insight_id);
            auto c = f.complete(p);
            CHECK_FALSE(c.narrative.body_markdown.empty());
            CHECK(uncited_numbers(c.narrative.body_markdown, c.narrative.stat_citations).empty());
        }
    }

    TEST_CASE("fixture narration is checked before adoption") {
        Fixture f;
        auto c = f.complete(trend_plan());
        auto req = narrate_request(c.plan, c.derived, c.spec);

        testing::TempDir good;
        llm::StubBackend::write_fixture(good.path, req,
                                        json{{"body", "Papers peak at 47 in one year."},
                                             {"citations", {{{"name", "max"}, {"value", 47}}}}});
        auto gw = testing::stub_gateway(good.path);
        auto span = trace::Span::disabled();
        auto n = narrate_insight(c.plan, c.derived, c.spec, gw.get(), span);
        CHECK(n.source == "llm");
        CHECK(n.body_markdown == "Papers peak at 47 in one year.");

        testing::TempDir bad;
        llm::StubBackend::write_fixture(bad.path, req,
                                        json{{"body", "Papers peak at 47, up 300 percent."},
                                             {"citations", {{{"name", "max"}, {"value", 47}}}}});
        auto gw2 = testing::stub_gateway(bad.path);
        auto n2 = narrate_insight(c.plan, c.derived, c.spec, gw2.get(), span);
        CHECK(n2.source == "template");
        CHECK(n2.body_markdown == c.narrative.body_markdown);
    }

    TEST_CASE("compose keeps plan order and lists skips") {
        Fixture f;
        std::vector<CompletedInsight> done{f.complete(trend_plan()), f.complete(comparison_plan())};
        SkippedInsight skip{correlation_plan(), {correlation_plan().insight_id, "RepairExhausted", "no such column", {"SELECT x"}}};
        planner::Intent intent{"show what drives citations.", 3, std::nullopt};
        auto r = compose_report(intent, f.s.schema, done, {skip}, "2026-01-01T00:00:00Z");
        CHECK(r["title"] == "Show what drives citations");
        REQUIRE(r["insights"].size() == 2);
        CHECK(r["insights"][0]["insight_id"] == trend_plan().insight_id);
        CHECK(r["insights"][1]["insight_id"] == comparison_plan().insight_id);
        CHECK(r["insights"][0]["sql"] == done[0].derived.final_query.sql);
        CHECK(r["insights"][0]["provenance"]["query_digest"] == sha256_hex(done[0].derived.final_query.sql));
        CHECK(r["insights"][0]["provenance"]["spec_digest"] == sha256_hex(done[0].chart_doc));
        REQUIRE(r["skipped"].size() == 1);
        CHECK(r["skipped"][0]["reason"] == "RepairExhausted");

        auto again = compose_report(intent, f.s.schema, done, {skip}, "2026-01-01T00:00:00Z");
        CHECK(dump_report(again) == dump_report(r));
    }

    TEST_CASE("compose rejects empty reports and uncited narratives") {
        Fixture f;
        planner::Intent intent{"goal", 3, std::nullopt};
        try {
            (void)compose_report(intent, f.s.schema, {}, {}, "t");
            FAIL("expected EmptyReport");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyReport);
        }
        auto c = f.complete(trend_plan());
        c.narrative.body_markdown += " Also 12345.";
        try {
            (void)compose_report(intent, f.s.schema, {c}, {}, "t");
            FAIL("expected SchemaViolation");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaViolation);
        }
    }

    TEST_CASE("viewer data is capped with a truncation flag") {
        deriver::DerivedDataset d;
        d.insight_id = "big";
        d.result_schema = {{"v", Kind::quantitative}};
        for (std::int64_t i = 0; i < 10005; ++i) d.rows.rows.push_back({i});
        auto j = json::parse(data_doc(d));
        CHECK(j["truncated"] == true);
        CHECK(j["row_count"] == 10005);
        CHECK(j["rows"].size() == kViewerRowCap);
        d.rows.rows.resize(3);
        auto small = json::parse(data_doc(d));
        CHECK(small["truncated"] == false);
        CHECK(small["rows"].size() == 3);
    }

    TEST_CASE("bundle layout and dual-output consistency") {
        Fixture f;
        std::vector<CompletedInsight> done{f.complete(trend_plan()), f.complete(comparison_plan()),
                                           f.complete(correlation_plan())};
        planner::Intent intent{"goal", 3, std::nullopt};
        auto r = compose_report(intent, f.s.schema, done, {}, "t");
        publisher::ArtifactManifest m;
        auto out = emit_bundle(f.tmp.path / "bundle", r, done, {}, f.store, &m);
        std::size_t index = 0, report = 0, charts = 0, data = 0, traces = 0;
        for (const auto& e : std::filesystem::recursive_directory_iterator(out.dir)) {
            if (!e.is_regular_file()) continue;
            const auto rel = std::filesystem::relative(e.path(), out.dir).generic_string();
            index += rel == "index.html";
            report += rel == "report.json";
            charts += rel.rfind("charts/", 0) == 0;
            data += rel.rfind("data/", 0) == 0;
            traces += rel.rfind("traces/", 0) == 0;
        }
        CHECK(index == 1);
        CHECK(report == 1);
        CHECK(charts == 3);
        CHECK(data == 3);
        CHECK(traces == 3);
        CHECK(slurp(out.dir / "report.json") == dump_report(r));
        for (const auto& c : done) {
            CHECK(slurp(out.dir / "charts" / (c.plan.insight_id + ".json")) == c.chart_doc);
            const auto doc = slurp(out.dir / "traces" / (c.plan.insight_id + ".md"));
            CHECK(doc.find("```sql\n" + c.derived.final_query.sql + "\n```") != std::string::npos);
            CHECK(doc.find(c.chart_doc) != std::string::npos);
            CHECK(doc.find(c.narrative.body_markdown) != std::string::npos);
        }
        const auto html = slurp(out.dir / "index.html");
        CHECK(html.find("http://") == std::string::npos);
        CHECK(html.find("https://") == std::string::npos);
        for (const auto& ref : out.refs) CHECK(f.store.exists(ref.store_key));
    }

    TEST_CASE("trace documents") {
        Fixture f;
        auto c = f.complete(comparison_plan());
        const auto doc = trace_doc(c);
        for (const char* h : {"## Question", "## Grounding hints", "## SQL", "## Result schema", "## Solver decision log",
                              "## Final spec", "## Narrative"})
            CHECK(doc.find(h) != std::string::npos);
        const auto log = doc.substr(doc.find("## Solver decision log"), doc.find("## Final spec") - doc.find("## Solver decision log"));
        std::size_t rows = 0;
        for (std::size_t p = 0; (p = log.find("\n| ", p)) != std::string::npos; ++p) ++rows;
        // Header row plus one per logged candidate.
        CHECK(rows - 1 == std::min<std::size_t>(5, vizrec::enumerate_candidates(c.partial, f.kb).size()));

        SkippedInsight s{correlation_plan(), {"x", "RepairExhausted", "no such column: Nonsense", {"SELECT a", "SELECT b", "SELECT c"}}};
        const auto sdoc = skipped_trace_doc(s);
        CHECK(sdoc.find("no such column: Nonsense") != std::string::npos);
        for (const char* q : {"SELECT a", "SELECT b", "SELECT c"}) CHECK(sdoc.find(q) != std::string::npos);
    }

    TEST_CASE("generated_at honours SOURCE_DATE_EPOCH") {
        ::setenv("SOURCE_DATE_EPOCH", "0", 1);
        CHECK(generated_at_now() == "1970-01-01T00:00:00Z");
        ::unsetenv("SOURCE_DATE_EPOCH");
        CHECK(generated_at_now().size() == 20);
    }
}
