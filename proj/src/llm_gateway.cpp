#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "reportsmith/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"

namespace reportsmith::llm {

using nlohmann::json;

std::string_view to_string(AgentRole r) {
    switch (r) {
        case AgentRole::describer: return "describer";
        case AgentRole::expander: return "expander";
        case AgentRole::planner: return "planner";
        case AgentRole::deriver: return "deriver";
        case AgentRole::repairer: return "repairer";
        case AgentRole::narrator: return "narrator";
    }
    return "describer";
}

AgentRole role_from_string(std::string_view s) {
    for (AgentRole r : kAllRoles)
        if (to_string(r) == s) return r;
    throw Error(ErrorCode::UnknownRole, "no agent role named '" + std::string(s) + "'");
}

std::string_view to_string(Tier t) { return t == Tier::fast ? "fast" : "powerful"; }

RoutingTable RoutingTable::defaults() {
    RoutingTable t;
    for (AgentRole r : kAllRoles) {
        ModelRoute m;
        m.role = r;
        m.tier = (r == AgentRole::deriver || r == AgentRole::narrator) ? Tier::powerful : Tier::fast;
        m.model_id = m.tier == Tier::powerful ? "powerful-model" : "fast-model";
        m.max_tokens = m.tier == Tier::powerful ? 4096 : 2048;
        t.routes_[r] = m;
    }
    return t;
}

RoutingTable RoutingTable::from_json(const json& j) {
    RoutingTable t;
    try {
        for (const auto& e : j.at("routes")) {
            ModelRoute m;
            m.role = role_from_string(e.at("agent_role").get<std::string>());
            auto tier = e.at("tier").get<std::string>();
            if (tier != "fast" && tier != "powerful") throw Error(ErrorCode::InvalidConfig, "unknown tier " + tier);
            m.tier = tier == "fast" ? Tier::fast : Tier::powerful;
            m.model_id = e.at("model_id").get<std::string>();
            m.max_tokens = e.value("max_tokens", 2048);
            m.temperature = e.value("temperature", 0.0);
            if (m.temperature != 0.0)
                throw Error(ErrorCode::InvalidConfig, "temperature must be 0 for role " + std::string(to_string(m.role)));
            if (!t.routes_.emplace(m.role, m).second)
                throw Error(ErrorCode::InvalidConfig, "duplicate route for " + std::string(to_string(m.role)));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("models.json: ") + e.what());
    }
    for (AgentRole r : kAllRoles)
        if (!t.routes_.contains(r)) throw Error(ErrorCode::InvalidConfig, "no route for role " + std::string(to_string(r)));
    return t;
}

RoutingTable RoutingTable::load(const std::filesystem::path& p) {
    try {
        return from_json(json::parse(read_file(p)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
    }
}

const ModelRoute& RoutingTable::route(AgentRole role) const {
    auto it = routes_.find(role);
    if (it == routes_.end()) throw Error(ErrorCode::UnknownRole, "no route for " + std::string(to_string(role)));
    return it->second;
}

const ModelRoute& RoutingTable::route(std::string_view role) const { return route(role_from_string(role)); }

nlohmann::ordered_json RoutingTable::to_json() const {
    nlohmann::ordered_json routes = nlohmann::ordered_json::array();
    for (AgentRole r : kAllRoles) {
        const auto& m = routes_.at(r);
        routes.push_back({{"agent_role", to_string(r)},
                          {"tier", to_string(m.tier)},
                          {"model_id", m.model_id},
                          {"max_tokens", m.max_tokens},
                          {"temperature", m.temperature}});
    }
    return {{"routes", routes}};
}

namespace {

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::string strip_fences(std::string_view raw) {
    std::string s(raw);
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    s = s.substr(first);
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        s = nl == std::string::npos ? "" : s.substr(nl + 1);
        auto end = s.rfind("```");
        if (end != std::string::npos) s = s.substr(0, end);
    }
    return s;
}

}  // namespace

std::string canonical_prompt(const GatewayRequest& req) {
    json j;
    j["role"] = to_string(req.role);
    j["schema"] = req.schema_id;
    json parts = json::array();
    for (const auto& p : req.text_parts) parts.push_back(collapse_ws(p));
    j["parts"] = parts;
    if (req.image) j["image"] = {{"mime_type", req.image->mime_type}, {"sha256", sha256_hex(req.image->base64)}};
    return canonical_dump(j);
}

std::string fixture_key(const GatewayRequest& req) { return sha256_hex(canonical_prompt(req)); }

std::optional<std::string> parse_structured(std::string_view schema_id, std::string_view raw, json& out) {
    if (schema_id == "text" || schema_id == "dataset_description") {
        std::string t = collapse_ws(raw);
        if (t.empty()) return "empty response";
        out = t;
        return std::nullopt;
    }
    json j;
    try {
        j = json::parse(strip_fences(raw));
    } catch (const json::exception& e) {
        return std::string("response is not valid JSON: ") + e.what();
    }
    if (!j.is_object()) return "response must be a JSON object";
    if (schema_id == "plan_step") {
        if (!j.contains("action") || !j["action"].is_string()) return "missing string field 'action'";
        auto a = j["action"].get<std::string>();
        if (a == "query_profile") {
            if (!j.contains("query") || !j["query"].is_object() || !j["query"].contains("kind") ||
                !j["query"]["kind"].is_string())
                return "query_profile action requires an object 'query' with string 'kind'";
        } else if (a == "final") {
            if (!j.contains("plans") || !j["plans"].is_array()) return "final action requires array 'plans'";
        } else {
            return "action must be 'query_profile' or 'final'";
        }
    } else if (schema_id == "sql_candidate") {
        if (!j.contains("sql") || !j["sql"].is_string()) return "missing string field 'sql'";
        if (!j.contains("roles") || !j["roles"].is_object()) return "missing object field 'roles'";
        for (const auto& [k, v] : j["roles"].items())
            if (!v.is_string()) return "role for '" + k + "' must be a string";
    } else if (schema_id == "narrative") {
        if (!j.contains("body") || !j["body"].is_string()) return "missing string field 'body'";
        if (!j.contains("citations") || !j["citations"].is_array()) return "missing array field 'citations'";
        for (const auto& c : j["citations"])
            if (!c.is_object() || !c.contains("name") || !c.contains("value") || !c["name"].is_string() ||
                !(c["value"].is_number() || c["value"].is_string()))
                return "each citation needs string 'name' and scalar 'value'";
    } else {
        return "unknown schema id '" + std::string(schema_id) + "'";
    }
    out = std::move(j);
    return std::nullopt;
}

// ------------------------------------------------------------------ stub

StubBackend::StubBackend(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path StubBackend::fixture_path(const std::filesystem::path& root, const GatewayRequest& req) {
    return root / std::string(to_string(req.role)) / (fixture_key(req) + ".json");
}

void StubBackend::write_fixture(const std::filesystem::path& root, const GatewayRequest& req, const json& response) {
    json doc;
    doc["response"] = response;
    doc["canonical_prompt"] = canonical_prompt(req);
    write_file_atomic(fixture_path(root, req), doc.dump(2) + "\n");
}

GatewayResponse StubBackend::call(const GatewayRequest& req, const ModelRoute& route, const std::optional<std::string>&) {
    auto path = fixture_path(root_, req);
    std::error_code ec;
    if (root_.empty() || !std::filesystem::exists(path, ec)) {
        std::lock_guard lock(mu_);
        misses_.push_back({req.role, fixture_key(req), canonical_prompt(req)});
        throw Error(ErrorCode::NoFixture, std::string(to_string(req.role)) + "/" + fixture_key(req));
    }
    GatewayResponse r;
    try {
        json doc = json::parse(read_file(path));
        const json& resp = doc.at("response");
        r.raw_text = resp.is_string() ? resp.get<std::string>() : resp.dump();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, "malformed fixture " + path.string() + ": " + e.what());
    }
    r.usage.backend = "stub";
    r.usage.model_id = route.model_id;
    return r;
}

std::vector<StubBackend::Miss> StubBackend::misses() const {
    std::lock_guard lock(mu_);
    return misses_;
}

// ------------------------------------------------------------------ http

std::atomic<std::int64_t> HttpBackend::calls_{0};

HttpBackend::HttpBackend(std::string endpoint_url, std::string api_key) : api_key_(std::move(api_key)) {
    auto scheme_end = endpoint_url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint must be an absolute URL");
    auto path_start = endpoint_url.find('/', scheme_end + 3);
    scheme_host_ = endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/v1/chat/completions" : endpoint_url.substr(path_start);
}

std::shared_ptr<HttpBackend> HttpBackend::from_env() {
    const char* ep = std::getenv("REPORTSMITH_LLM_ENDPOINT");
    const char* key = std::getenv("REPORTSMITH_LLM_KEY");
    if (!ep || !*ep) throw Error(ErrorCode::InvalidConfig, "REPORTSMITH_LLM_ENDPOINT is not set");
    return std::make_shared<HttpBackend>(ep, key ? key : "");
}

std::int64_t HttpBackend::network_calls() { return calls_.load(); }

json HttpBackend::build_body(const GatewayRequest& req, const ModelRoute& route, const std::optional<std::string>& feedback) {
    json messages = json::array();
    messages.push_back({{"role", "system"},
                        {"content", "You are the " + std::string(to_string(req.role)) +
                                        " agent of a data-reporting pipeline. Respond with output matching schema '" +
                                        req.schema_id + "'."}});
    std::string text;
    for (const auto& p : req.text_parts) {
        if (!text.empty()) text += "\n\n";
        text += p;
    }
    if (req.image) {
        json content = json::array();
        content.push_back({{"type", "text"}, {"text", text}});
        content.push_back({{"type", "image_url"},
                           {"image_url", {{"url", "data:" + req.image->mime_type + ";base64," + req.image->base64}}}});
        messages.push_back({{"role", "user"}, {"content", content}});
    } else {
        messages.push_back({{"role", "user"}, {"content", text}});
    }
    if (feedback)
        messages.push_back({{"role", "user"},
                            {"content", "Your previous answer was rejected by the validator: " + *feedback +
                                            "\nAnswer again following the schema exactly."}});
    json body = {{"model", route.model_id},
                 {"messages", messages},
                 {"temperature", route.temperature},
                 {"max_tokens", route.max_tokens}};
    if (req.schema_id != "text" && req.schema_id != "dataset_description")
        body["response_format"] = {{"type", "json_object"}};
    return body;
}

GatewayResponse HttpBackend::call(const GatewayRequest& req, const ModelRoute& route,
                                  const std::optional<std::string>& feedback) {
    httplib::Client cli(scheme_host_);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto body = build_body(req, route, feedback).dump();
    calls_++;
    auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Post(path_, headers, body, "application/json");
    auto t1 = std::chrono::steady_clock::now();
    if (!res) throw Error(ErrorCode::HttpError, "request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::HttpError, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    GatewayResponse r;
    try {
        json j = json::parse(res->body);
        r.raw_text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::HttpError, std::string("malformed chat-completion response: ") + e.what());
    }
    r.usage.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    r.usage.model_id = route.model_id;
    r.usage.backend = "http";
    return r;
}

// ------------------------------------------------------------------ gateway

Gateway::Gateway(RoutingTable routes, std::shared_ptr<Backend> backend, int max_in_flight)
    : routes_(std::move(routes)), backend_(std::move(backend)), in_flight_(std::clamp(max_in_flight, 1, 64)) {}

GatewayResponse Gateway::complete(const GatewayRequest& req, trace::Span& parent) {
    const ModelRoute& route = routes_.route(req.role);
    auto span = parent.child("llm:" + std::string(to_string(req.role)));
    span.set_role(std::string(to_string(req.role)));
    span.set("span_kind", "llm");
    span.set("tier", to_string(route.tier));
    span.set("schema_id", req.schema_id);
    span.set_input_digest(fixture_key(req));

    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    std::optional<std::string> feedback;
    const int attempts = backend_->retries_schema_violations() ? 2 : 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        GatewayResponse r;
        try {
            r = backend_->call(req, route, feedback);
        } catch (const Error& e) {
            // A fixture miss is the expected offline path; the caller falls back.
            if (e.code() == ErrorCode::NoFixture) {
                span.degrade();
                span.set("fallback", "no_fixture");
            } else {
                span.fail(e.what());
            }
            span.set("backend", backend_->name());
            span.set("model_id", route.model_id);
            throw;
        }
        auto violation = parse_structured(req.schema_id, r.raw_text, r.parsed);
        record_usage(r, span);
        if (!violation) {
            span.set_output_digest(sha256_hex(r.raw_text));
            return r;
        }
        feedback = *violation;
        span.set("schema_violation", *violation);
    }
    span.fail("schema violation: " + *feedback);
    throw Error(ErrorCode::SchemaViolation, *feedback);
}

void record_usage(const GatewayResponse& response, trace::Span& span) {
    span.set("backend", response.usage.backend);
    span.set("model_id", response.usage.model_id);
    span.set("prompt_tokens", response.usage.prompt_tokens);
    span.set("completion_tokens", response.usage.completion_tokens);
    span.set("latency_ms", response.usage.latency_ms);
}

}  // namespace reportsmith::llm
