#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/trace.hpp"

namespace reportsmith::llm {

enum class AgentRole { describer, expander, planner, deriver, repairer, narrator };
enum class Tier { fast, powerful };

std::string_view to_string(AgentRole r);
/// Throws UnknownRole.
AgentRole role_from_string(std::string_view s);
std::string_view to_string(Tier t);
inline constexpr AgentRole kAllRoles[] = {AgentRole::describer, AgentRole::expander, AgentRole::planner,
                                          AgentRole::deriver,   AgentRole::repairer, AgentRole::narrator};

struct ModelRoute {
    AgentRole role = AgentRole::describer;
    Tier tier = Tier::fast;
    std::string model_id;
    int max_tokens = 2048;
    double temperature = 0.0;
};

class RoutingTable {
public:
    /// Deriver and narrator on the powerful tier, everything else fast.
    static RoutingTable defaults();
    /// Parses a `models.json` document. Fails fast (InvalidConfig) when a role
    /// has no route, a role appears twice, or a temperature is not zero.
    static RoutingTable from_json(const nlohmann::json& j);
    static RoutingTable load(const std::filesystem::path& p);

    const ModelRoute& route(AgentRole role) const;
    /// Throws UnknownRole for names outside the agent-role taxonomy.
    const ModelRoute& route(std::string_view role) const;
    nlohmann::ordered_json to_json() const;

private:
    std::map<AgentRole, ModelRoute> routes_;
};

struct ImagePayload {
    std::string mime_type;
    std::string base64;
};

struct GatewayRequest {
    AgentRole role = AgentRole::describer;
    std::vector<std::string> text_parts;
    std::optional<ImagePayload> image;
    /// One of: text, dataset_description, plan_step, sql_candidate, narrative.
    std::string schema_id = "text";
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_ms = 0.0;
    std::string model_id;
    std::string backend;
};

struct GatewayResponse {
    std::string raw_text;
    nlohmann::json parsed;
    Usage usage;
};

/// Whitespace-collapsed, key-sorted serialization of a request; the stub
/// backend addresses fixtures by its SHA-256.
std::string canonical_prompt(const GatewayRequest& req);
std::string fixture_key(const GatewayRequest& req);

/// Parses raw model text into a structured value for the named schema.
/// Returns the violation message on failure.
std::optional<std::string> parse_structured(std::string_view schema_id, std::string_view raw, nlohmann::json& out);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    /// Returns raw text and usage; parsing and validation happen in the Gateway.
    virtual GatewayResponse call(const GatewayRequest& req, const ModelRoute& route,
                                 const std::optional<std::string>& feedback) = 0;
    /// Whether schema violations get one retry with the validator message appended.
    virtual bool retries_schema_violations() const = 0;
};

/// Fixture-backed backend: `<root>/<role>/<fixture_key>.json`, each holding
/// {"response": <text or JSON value>}. A missing file is NoFixture.
class StubBackend : public Backend {
public:
    explicit StubBackend(std::filesystem::path root);
    std::string name() const override { return "stub"; }
    GatewayResponse call(const GatewayRequest& req, const ModelRoute& route,
                         const std::optional<std::string>& feedback) override;
    bool retries_schema_violations() const override { return false; }

    struct Miss {
        AgentRole role;
        std::string key;
        std::string canonical_prompt;
    };
    std::vector<Miss> misses() const;
    /// Writes a fixture file for `req` (used by tooling and tests to record fixtures).
    static void write_fixture(const std::filesystem::path& root, const GatewayRequest& req,
                              const nlohmann::json& response);
    static std::filesystem::path fixture_path(const std::filesystem::path& root, const GatewayRequest& req);

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::vector<Miss> misses_;
};

/// OpenAI-compatible chat-completions client.
class HttpBackend : public Backend {
public:
    HttpBackend(std::string endpoint_url, std::string api_key);
    /// Reads REPORTSMITH_LLM_ENDPOINT and REPORTSMITH_LLM_KEY; InvalidConfig if the endpoint is unset.
    static std::shared_ptr<HttpBackend> from_env();

    std::string name() const override { return "http"; }
    GatewayResponse call(const GatewayRequest& req, const ModelRoute& route,
                         const std::optional<std::string>& feedback) override;
    bool retries_schema_violations() const override { return true; }

    /// Process-wide count of HTTP requests issued by any HttpBackend.
    static std::int64_t network_calls();

    /// Request body as sent on the wire.
    static nlohmann::json build_body(const GatewayRequest& req, const ModelRoute& route,
                                     const std::optional<std::string>& feedback);

private:
    std::string scheme_host_;
    std::string path_;
    std::string api_key_;
    static std::atomic<std::int64_t> calls_;
};

/// Single choke point for model calls: routing, in-flight cap, structured
/// output validation and one child span per call.
class Gateway {
public:
    Gateway(RoutingTable routes, std::shared_ptr<Backend> backend, int max_in_flight = 4);

    /// Throws NoFixture, HttpError or SchemaViolation. Callers treat all three
    /// as a gateway failure and take their deterministic path.
    GatewayResponse complete(const GatewayRequest& req, trace::Span& parent);

    const RoutingTable& routes() const { return routes_; }
    std::string backend_name() const { return backend_->name(); }
    Backend& backend() { return *backend_; }

private:
    RoutingTable routes_;
    std::shared_ptr<Backend> backend_;
    std::counting_semaphore<64> in_flight_;
};

/// Attaches token counts, model id, backend and latency to the calling span.
void record_usage(const GatewayResponse& response, trace::Span& span);

}  // namespace reportsmith::llm
