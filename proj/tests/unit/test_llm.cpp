#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "helpers.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/llm_gateway.hpp"

using namespace reportsmith;
using namespace reportsmith::llm;
using nlohmann::json;

namespace {

GatewayRequest request(std::vector<std::string> parts, AgentRole role = AgentRole::describer,
                       std::string schema = "text") {
    GatewayRequest r;
    r.role = role;
    r.text_parts = std::move(parts);
    r.schema_id = std::move(schema);
    return r;
}

json models_json() {
    std::ifstream in(testing::source_dir() / "config/models.json");
    return json::parse(in);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_SUITE("llm") {
    TEST_CASE("routing defaults") {
        auto t = RoutingTable::defaults();
        CHECK(t.route(AgentRole::deriver).tier == Tier::powerful);
        CHECK(t.route(AgentRole::narrator).tier == Tier::powerful);
        for (auto r : {AgentRole::describer, AgentRole::expander, AgentRole::planner, AgentRole::repairer})
            CHECK(t.route(r).tier == Tier::fast);
        CHECK(code_of([&] { (void)t.route("oracle"); }) == ErrorCode::UnknownRole);
        CHECK(RoutingTable::from_json(models_json()).to_json() == t.to_json());
    }

    TEST_CASE("routing table validation fails fast") {
        auto missing = models_json();
        missing["routes"].erase(missing["routes"].begin());
        CHECK(code_of([&] { RoutingTable::from_json(missing); }) == ErrorCode::InvalidConfig);

        auto dup = models_json();
        dup["routes"].push_back(dup["routes"][0]);
        CHECK(code_of([&] { RoutingTable::from_json(dup); }) == ErrorCode::InvalidConfig);

        auto hot = models_json();
        hot["routes"][0]["temperature"] = 0.7;
        CHECK(code_of([&] { RoutingTable::from_json(hot); }) == ErrorCode::InvalidConfig);
    }

    TEST_CASE("fixture keys ignore whitespace layout") {
        auto a = request({"Describe   the\n\tdataset", "columns: a, b"});
        auto b = request({"Describe the dataset", "columns:  a,  b  "});
        CHECK(fixture_key(a) == fixture_key(b));
        CHECK(fixture_key(a).size() == 64);
        CHECK(fixture_key(a) != fixture_key(request({"Describe the dataset", "columns: a, c"})));
        CHECK(fixture_key(a) != fixture_key(request({"Describe the dataset", "columns: a, b"}, AgentRole::planner)));
        CHECK(fixture_key(a) != fixture_key(request({"Describe the dataset columns: a, b"})));
    }

    TEST_CASE("stub hit and miss") {
        testing::TempDir tmp;
        auto req = request({"hello"}, AgentRole::deriver, "sql_candidate");
        StubBackend::write_fixture(tmp.path, req, json{{"sql", "SELECT 1 AS one"}, {"roles", {{"one", "measure"}}}});
        CHECK(std::filesystem::exists(tmp.path / "deriver" / (fixture_key(req) + ".json")));

        auto backend = std::make_shared<StubBackend>(tmp.path);
        Gateway gw(RoutingTable::defaults(), backend);
        auto store = std::make_shared<trace::TraceStore>("t");
        const auto before = HttpBackend::network_calls();
        {
            auto root = trace::Span::root(store, "run");
            auto r = gw.complete(req, root);
            CHECK(r.parsed["sql"] == "SELECT 1 AS one");
            CHECK(r.usage.backend == "stub");
            CHECK(r.usage.prompt_tokens == 0);

            auto miss = request({"unknown"}, AgentRole::narrator, "narrative");
            CHECK(code_of([&] { gw.complete(miss, root); }) == ErrorCode::NoFixture);
            REQUIRE(backend->misses().size() == 1);
            CHECK(backend->misses()[0].key == fixture_key(miss));
        }
        CHECK(HttpBackend::network_calls() == before);
        auto spans = store->spans();
        int llm = 0;
        for (const auto& s : spans)
            if (s.attributes.value("span_kind", "") == "llm") {
                ++llm;
                CHECK(s.attributes["backend"] == "stub");
            }
        CHECK(llm == 2);
    }

    TEST_CASE("structured output validation") {
        json out;
        CHECK_FALSE(parse_structured("sql_candidate", R"({"sql":"SELECT 1","roles":{}})", out));
        CHECK_FALSE(parse_structured("sql_candidate", "```json\n{\"sql\":\"SELECT 1\",\"roles\":{}}\n```", out));
        CHECK(parse_structured("sql_candidate", R"({"roles":{}})", out));
        CHECK(parse_structured("sql_candidate", "not json", out));
        CHECK(parse_structured("narrative", R"({"citations":[]})", out));
        CHECK(parse_structured("plan_step", R"({"action":"dance"})", out));
        CHECK_FALSE(parse_structured("text", "  some\n text ", out));
        CHECK(out == "some text");
        CHECK(parse_structured("text", "   ", out));
    }

    TEST_CASE("http backend retries one schema violation then gives up") {
        httplib::Server srv;
        std::atomic<int> hits{0};
        srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            auto body = json::parse(req.body);
            CHECK(body["temperature"] == 0.0);
            json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "definitely not json"}}}}}},
                          {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
            res.set_content(reply.dump(), "application/json");
        });
        const int port = srv.bind_to_any_port("127.0.0.1");
        std::thread th([&] { srv.listen_after_bind(); });
        srv.wait_until_ready();

        auto backend = std::make_shared<HttpBackend>("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "k");
        Gateway gw(RoutingTable::defaults(), backend);
        auto store = std::make_shared<trace::TraceStore>("t");
        const auto before = HttpBackend::network_calls();
        {
            auto root = trace::Span::root(store, "run");
            CHECK(code_of([&] { gw.complete(request({"q"}, AgentRole::deriver, "sql_candidate"), root); }) ==
                  ErrorCode::SchemaViolation);
        }
        srv.stop();
        th.join();
        CHECK(hits.load() == 2);
        CHECK(HttpBackend::network_calls() - before == 2);
        for (const auto& s : store->spans())
            if (s.stage_name.rfind("llm:", 0) == 0) {
                CHECK(s.status == trace::Status::error);
                CHECK(s.attributes["prompt_tokens"] == 11);
                CHECK(s.attributes["latency_ms"].get<double>() > 0);
            }
    }

    TEST_CASE("http request body carries the feedback on retry") {
        auto body = HttpBackend::build_body(request({"a", "b"}), RoutingTable::defaults().route(AgentRole::describer),
                                            std::string("missing field"));
        CHECK(body["model"] == RoutingTable::defaults().route(AgentRole::describer).model_id);
        CHECK(body["messages"].dump().find("missing field") != std::string::npos);
    }
}
