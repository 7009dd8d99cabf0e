#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/ingest.hpp"
#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/profiler.hpp"
#include "reportsmith/roles.hpp"
#include "reportsmith/trace.hpp"

namespace reportsmith::planner {

struct Intent {
    std::string goal;
    int insight_count = 3;
    std::optional<std::string> audience_note;

    /// Throws InvalidConfig unless 1 <= insight_count <= 12.
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

struct PlanField {
    std::string name;
    Role role = Role::measure;
};

struct InsightPlan {
    std::string insight_id;
    std::string title;
    std::string question;
    Task task = Task::distribution;
    std::vector<PlanField> fields;
    std::vector<std::string> grounding;

    std::vector<std::string> fields_with(Role role) const;
    nlohmann::ordered_json to_json() const;
    /// Throws PlanInvalid on malformed documents (unknown task or role, missing keys).
    static InsightPlan from_json(const nlohmann::json& j);
    std::string digest() const;
};

/// Throws PlanInvalid listing every violation: unknown fields, role/kind
/// mismatches, empty field or grounding lists, duplicate fields.
void validate_plan(const InsightPlan& plan, const ingest::DatasetSchema& schema);

/// Lowercase slug of the task and field names, e.g. "trend-year-downloads".
std::string make_insight_id(Task task, const std::vector<PlanField>& fields);

/// Rule-based plans, pure in its inputs. Scores: trend 10 (+5 with a
/// measure), correlation 8 + 4|r|, comparison 6 (+2 when the dimension is a
/// facet candidate), distribution 4 (+2 when the field is skewed), ranking 5.
/// The best candidate of every task comes first, then the runners-up, each
/// tier ordered by score, field names and task name. May return fewer plans
/// than requested; throws InsufficientFields when nothing can be formed.
std::vector<InsightPlan> fallback_plan(const Intent& intent, const ingest::DatasetSchema& schema,
                                       const profiler::StatisticalProfile& profile);

/// Grounding references a fallback plan may cite: every hint ref plus one
/// "field_summary:<field>" evidence ref per schema field.
std::set<std::string> fallback_evidence(const profiler::StatisticalProfile& profile,
                                        const ingest::DatasetSchema& schema);

inline constexpr int kMaxToolCalls = 8;
inline constexpr int kMaxRetries = 2;

struct PlanOutcome {
    std::vector<InsightPlan> plans;
    bool used_fallback = false;
    int tool_calls = 0;
    int retries = 0;
    /// Grounding refs returned to the planner during the session.
    std::set<std::string> returned_refs;
};

/// ReAct loop over query_profile, falling back to fallback_plan on gateway
/// failure or after kMaxRetries invalid final answers. Records tool spans and
/// planner attributes under `span`.
PlanOutcome plan_insights(const Intent& intent, const ingest::DatasetSchema& schema,
                          const profiler::StatisticalProfile& profile, llm::Gateway* gateway, trace::Span& span);

/// Prompt for one step of the planning loop; `transcript` holds prior
/// actions and observations, `feedback` the validator message for a retry.
llm::GatewayRequest step_request(const Intent& intent, const ingest::DatasetSchema& schema,
                                 const std::vector<std::string>& transcript, const std::optional<std::string>& feedback);

}  // namespace reportsmith::planner
