#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reportsmith {

enum class ErrorCode {
    UnreadableSource,
    UnsupportedFormat,
    EmptyDataset,
    KnowledgeSourceUnavailable,
    UnknownField,
    UnknownQueryKind,
    InsufficientFields,
    PlanInvalid,
    RepairExhausted,
    InsightSkipped,
    StoreUnavailable,
    NoBindableFields,
    NoValidCandidate,
    UnknownRole,
    NoFixture,
    HttpError,
    SchemaViolation,
    EmptyReport,
    UnknownNode,
    InvalidConfig,
    ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

class PlanInvalid : public Error {
public:
    explicit PlanInvalid(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

}  // namespace reportsmith
