#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/deriver.hpp"
#include "reportsmith/ingest.hpp"
#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/planner.hpp"
#include "reportsmith/publisher.hpp"
#include "reportsmith/trace.hpp"
#include "reportsmith/vizrec.hpp"

namespace reportsmith::reporter {

inline constexpr std::size_t kViewerRowCap = 10000;
inline constexpr const char* kReportVersion = "1.0";

struct Citation {
    std::string name;
    double value = 0;
    /// Exactly as it appears in the body.
    std::string text;
};

struct Narrative {
    std::string insight_id;
    std::string title;
    std::string body_markdown;
    std::vector<Citation> stat_citations;
    std::string source = "template";

    nlohmann::ordered_json to_json() const;
    static Narrative from_json(const nlohmann::json& j);
};

/// Compact decimal text: integers without a fraction, others rounded to two
/// decimals with trailing zeros removed.
std::string format_stat(double v);

/// Numbers in the body (outside `code spans` and not glued to identifiers)
/// that no citation accounts for. A citation accounts for a number when its
/// value rounded to the number's decimal places equals it.
std::vector<std::string> uncited_numbers(const std::string& body, const std::vector<Citation>& citations);

Narrative template_narrative(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                             const vizrec::CompleteSpec& spec);
llm::GatewayRequest narrate_request(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                                    const vizrec::CompleteSpec& spec);
/// LLM narration when it passes the citation check, otherwise the template.
Narrative narrate_insight(const planner::InsightPlan& plan, const deriver::DerivedDataset& derived,
                          const vizrec::CompleteSpec& spec, llm::Gateway* gateway, trace::Span& span);

struct CompletedInsight {
    planner::InsightPlan plan;
    deriver::DerivedDataset derived;
    vizrec::PartialSpec partial;
    vizrec::CompleteSpec spec;
    std::string chart_doc;
    Narrative narrative;
    std::string trace_span_id;
};

struct SkippedInsight {
    planner::InsightPlan plan;
    deriver::Skipped skipped;
};

/// Insights in plan order; `plan_order` lists every planned insight id.
/// Throws EmptyReport when nothing completed.
nlohmann::ordered_json compose_report(const planner::Intent& intent, const ingest::DatasetSchema& schema,
                                      const std::vector<CompletedInsight>& completed,
                                      const std::vector<SkippedInsight>& skipped, const std::string& generated_at);

std::string report_title(const std::string& goal);

/// SOURCE_DATE_EPOCH when set, else the current time, as UTC ISO-8601.
std::string generated_at_now();

std::string trace_doc(const CompletedInsight& insight);
std::string skipped_trace_doc(const SkippedInsight& insight);
std::string data_doc(const deriver::DerivedDataset& derived, std::size_t cap = kViewerRowCap);
std::string index_html(const nlohmann::ordered_json& report);
/// Stable two-space JSON with trailing newline.
std::string dump_report(const nlohmann::ordered_json& report);

struct BundleResult {
    std::filesystem::path dir;
    std::vector<publisher::ArtifactRef> refs;
};

/// Writes `<dir>/{index.html, report.json, charts/, data/, traces/}` and
/// stores every file as a report asset. Throws StoreUnavailable.
BundleResult emit_bundle(const std::filesystem::path& dir, const nlohmann::ordered_json& report,
                         const std::vector<CompletedInsight>& completed, const std::vector<SkippedInsight>& skipped,
                         publisher::ObjectStore& store, publisher::ArtifactManifest* manifest);

}  // namespace reportsmith::reporter
