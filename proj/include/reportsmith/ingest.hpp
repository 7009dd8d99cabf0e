#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reportsmith/llm_gateway.hpp"
#include "reportsmith/trace.hpp"
#include "reportsmith/value.hpp"

namespace reportsmith::ingest {

enum class Format { csv, parquet };

struct FieldSchema {
    std::string name;
    Kind kind = Kind::nominal;
    std::optional<std::string> unit_hint;
    std::string description;
    std::optional<std::map<std::string, std::string>> code_dictionary;
    /// Declared level order; only present for ordinal fields.
    std::vector<std::string> rank;

    nlohmann::ordered_json to_json() const;
    static FieldSchema from_json(const nlohmann::json& j);
};

struct DatasetSchema {
    std::string dataset_digest;
    std::vector<FieldSchema> fields;
    std::string description;
    std::size_t row_count = 0;

    const FieldSchema* find(std::string_view name) const;
    nlohmann::ordered_json to_json() const;
    static DatasetSchema from_json(const nlohmann::json& j);
};

struct Options {
    std::vector<std::string> null_sentinels{"", "NA", "N/A", "null"};
};

/// Accepts plain paths and file:// URIs. The format comes from the hint, else
/// the extension. Throws UnreadableSource, UnsupportedFormat or EmptyDataset.
RawTable load_dataset(const std::string& uri, std::optional<Format> format_hint = std::nullopt);
RawTable parse_csv_table(std::string_view text, std::string source_uri);
RawTable parse_parquet_table(std::string_view bytes, std::string source_uri);

/// Digest over column names and cells; independent of the file encoding.
std::string table_digest(const RawTable& table);

/// Trims cells and maps sentinel nulls to null. Never changes row_count.
RawTable clean(const RawTable& table, const Options& opts = {});

/// Deterministic kind assignment per column (precedence boolean > temporal >
/// quantitative > identifier > ordinal > nominal).
std::vector<FieldSchema> refine_fields(const RawTable& table, const Options& opts = {});

/// Converts cleaned cells into typed values per field kind. Cells that do not
/// parse under a numeric kind become null.
Table apply_schema(const RawTable& cleaned, const std::vector<FieldSchema>& fields);

/// First `limit` distinct non-null values in first-occurrence order.
std::vector<std::string> distinct_samples(const RawColumn& column, std::size_t limit = 20);

/// True for values of length <= 3 made of uppercase letters and digits.
bool is_cryptic_token(std::string_view v);

struct FieldKnowledge {
    std::map<std::string, std::string> labels;
    std::vector<std::string> rank;
};

class KnowledgeSource {
public:
    virtual ~KnowledgeSource() = default;
    virtual std::string name() const = 0;
    /// nullopt when the source knows nothing about the field. Throws
    /// KnowledgeSourceUnavailable when the backend cannot be reached.
    virtual std::optional<FieldKnowledge> lookup(const std::string& field) = 0;
};

/// Directory of `<field-name>.json` files holding flat code -> label maps. An
/// optional "__rank__" array declares the level order of an ordinal field.
class FixtureKnowledge : public KnowledgeSource {
public:
    explicit FixtureKnowledge(std::filesystem::path dir);
    std::string name() const override { return "fixture:" + dir_.string(); }
    std::optional<FieldKnowledge> lookup(const std::string& field) override;

private:
    std::filesystem::path dir_;
};

/// Resolves cryptic codes through the knowledge source. Only values present in
/// `samples` can become dictionary keys. An unavailable source leaves the
/// field untouched and records a degraded warning span under `span`.
FieldSchema expand_codes(const FieldSchema& field, const std::vector<std::string>& samples, KnowledgeSource* knowledge,
                         trace::Span& span);

/// LLM summary of the dataset, or the deterministic template when the gateway
/// is absent or fails.
DatasetSchema describe_dataset(std::vector<FieldSchema> fields, const RawTable& cleaned, llm::Gateway* gateway,
                               trace::Span& span);

std::string template_description(const std::vector<FieldSchema>& fields, std::size_t row_count);
llm::GatewayRequest describe_request(const std::vector<FieldSchema>& fields, const RawTable& cleaned);

}  // namespace reportsmith::ingest
