#include "reportsmith/error.hpp"

namespace reportsmith {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnreadableSource: return "UnreadableSource";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::KnowledgeSourceUnavailable: return "KnowledgeSourceUnavailable";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::UnknownQueryKind: return "UnknownQueryKind";
        case ErrorCode::InsufficientFields: return "InsufficientFields";
        case ErrorCode::PlanInvalid: return "PlanInvalid";
        case ErrorCode::RepairExhausted: return "RepairExhausted";
        case ErrorCode::InsightSkipped: return "InsightSkipped";
        case ErrorCode::StoreUnavailable: return "StoreUnavailable";
        case ErrorCode::NoBindableFields: return "NoBindableFields";
        case ErrorCode::NoValidCandidate: return "NoValidCandidate";
        case ErrorCode::UnknownRole: return "UnknownRole";
        case ErrorCode::NoFixture: return "NoFixture";
        case ErrorCode::HttpError: return "HttpError";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::EmptyReport: return "EmptyReport";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

namespace {
std::string join_violations(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}
}  // namespace

PlanInvalid::PlanInvalid(std::vector<std::string> violations)
    : Error(ErrorCode::PlanInvalid, join_violations(violations)), violations_(std::move(violations)) {}

}  // namespace reportsmith
