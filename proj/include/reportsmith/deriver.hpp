#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/ingest.hpp"
#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/planner.hpp"
#include "reportsmith/profiler.hpp"
#include "reportsmith/publisher.hpp"
#include "reportsmith/roles.hpp"
#include "reportsmith/sql_engine.hpp"
#include "reportsmith/trace.hpp"

namespace reportsmith::deriver {

inline constexpr std::size_t kRowCap = 100000;
inline constexpr int kDefaultMaxAttempts = 3;

struct CandidateQuery {
    std::string sql;
    /// Output column -> role, in projection order.
    std::vector<std::pair<std::string, Role>> roles;
    int attempt = 0;

    std::optional<Role> role_of(const std::string& column) const;
    nlohmann::ordered_json to_json() const;
    static CandidateQuery from_json(const nlohmann::json& j);
};

struct ValidationResult {
    bool ok = false;
    std::vector<publisher::ResultColumn> result_schema;
    std::optional<std::size_t> row_count;
    std::optional<std::string> error_message;
};

/// Template SQL for a plan: uppercase keywords, one clause per line.
CandidateQuery template_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema);

llm::GatewayRequest draft_request(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema);
llm::GatewayRequest repair_request(const CandidateQuery& candidate, const ValidationResult& validation,
                                   const ingest::DatasetSchema& schema);

/// LLM draft, or the template on any gateway failure. attempt is always 0.
CandidateQuery draft_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema,
                           llm::Gateway* gateway, trace::Span& span);

/// Engine for one derivation session with the dataset registered as `data`.
std::unique_ptr<sql::Engine> open_session(const Table& table);

/// Never throws for query problems; they come back as ok=false with the
/// engine's message (trailing whitespace trimmed).
ValidationResult validate_query(const std::string& sql, const sql::Engine& engine, const ingest::DatasetSchema& schema,
                                std::size_t row_cap = kRowCap);

/// Empty when every result column has exactly one role and no role names a
/// missing column.
std::optional<std::string> check_roles(const CandidateQuery& candidate,
                                       const std::vector<publisher::ResultColumn>& result_schema);

/// Deterministic fix table applied when no repair model answers.
CandidateQuery stub_repair(const CandidateQuery& candidate, const ValidationResult& validation,
                           const ingest::DatasetSchema& schema);

/// Throws RepairExhausted when candidate.attempt >= max_attempts.
CandidateQuery repair_query(const CandidateQuery& candidate, const ValidationResult& validation,
                            const ingest::DatasetSchema& schema, llm::Gateway* gateway, trace::Span& span,
                            int max_attempts = kDefaultMaxAttempts);

std::size_t edit_distance(std::string_view a, std::string_view b);

struct DerivedDataset {
    std::string insight_id;
    CandidateQuery final_query;
    std::vector<publisher::ResultColumn> result_schema;
    publisher::ArtifactRef artifact;
    std::vector<profiler::FieldProfile> mini_profile;
    publisher::ResultSet rows;

    nlohmann::ordered_json to_json(bool include_rows = false) const;
    static DerivedDataset from_json(const nlohmann::json& j);
};

struct Skipped {
    std::string insight_id;
    std::string reason;
    std::string last_error;
    std::vector<std::string> attempted_sql;
};

struct QueryOutcome {
    std::optional<CandidateQuery> query;
    std::vector<publisher::ResultColumn> result_schema;
    std::optional<Skipped> skipped;
    std::vector<std::string> attempted_sql;
};

/// draft -> validate -> (repair -> validate)* with one repair span per
/// repair under `span`. The returned SQL already carries its canonical ORDER BY.
QueryOutcome derive_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema,
                          const sql::Engine& engine, llm::Gateway* gateway, trace::Span& span,
                          int max_attempts = kDefaultMaxAttempts);

/// Executes the final query, stores the rows as a Parquet artifact and
/// profiles them.
DerivedDataset materialize(const std::string& insight_id, const CandidateQuery& query,
                           const ingest::DatasetSchema& schema, const sql::Engine& engine,
                           publisher::ObjectStore& store, publisher::ArtifactManifest* manifest, trace::Span& span);

struct DeriveOutcome {
    std::optional<DerivedDataset> derived;
    std::optional<Skipped> skipped;
    std::vector<std::string> attempted_sql;
};

/// derive_query followed by materialize in one engine session.
DeriveOutcome derive(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema, const Table& table,
                     llm::Gateway* gateway, publisher::ObjectStore& store, publisher::ArtifactManifest* manifest,
                     trace::Span& span, int max_attempts = kDefaultMaxAttempts);

/// Appends a canonical ORDER BY over every output column when the query has
/// no top-level ORDER BY.
std::string with_canonical_order(const std::string& sql, std::size_t column_count);

/// Kind of a result column: a column named after a schema field keeps that
/// field's kind when its values allow it, otherwise all-numeric values are
/// quantitative and anything else nominal.
Kind infer_result_kind(const std::string& column, const std::vector<Value>& values, const ingest::DatasetSchema& schema);

}  // namespace reportsmith::deriver
