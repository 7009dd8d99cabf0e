#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reportsmith/value.hpp"

namespace reportsmith::publisher {

enum class ArtifactKind { derived_parquet, chart_json, report_manifest, trace_doc, html_bundle_member };
std::string_view to_string(ArtifactKind k);
ArtifactKind artifact_kind_from_string(std::string_view s);

struct ArtifactRef {
    std::string digest;
    ArtifactKind kind = ArtifactKind::derived_parquet;
    std::string logical_name;
    std::size_t byte_size = 0;
    std::string store_key;
    /// Only for derived_parquet.
    std::optional<std::size_t> row_count;

    nlohmann::ordered_json to_json() const;
    static ArtifactRef from_json(const nlohmann::json& j);
};

std::string content_key(std::string_view bytes);
/// "artifacts/" + digest[0..2] + "/" + digest + extension
std::string store_key(const std::string& digest, std::string_view extension);

class ObjectStore {
public:
    virtual ~ObjectStore() = default;
    virtual std::string backend() const = 0;
    /// Idempotent. Returns false when an object with that key already existed.
    virtual bool put(const std::string& key, std::string_view bytes) = 0;
    virtual std::optional<std::string> get(const std::string& key) const = 0;
    virtual bool exists(const std::string& key) const = 0;
};

/// `<root>/<store_key>`; writes go through temp file + rename.
class FilesystemStore : public ObjectStore {
public:
    explicit FilesystemStore(std::filesystem::path root);
    std::string backend() const override { return "filesystem"; }
    bool put(const std::string& key, std::string_view bytes) override;
    std::optional<std::string> get(const std::string& key) const override;
    bool exists(const std::string& key) const override;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

/// Run-level artifact list. Appends are serialized; a ref equal to one already
/// recorded is not added again.
class ArtifactManifest {
public:
    void add(const ArtifactRef& ref);
    std::vector<ArtifactRef> refs() const;
    nlohmann::ordered_json to_json() const;

private:
    mutable std::mutex mu_;
    std::vector<ArtifactRef> refs_;
};

struct ResultColumn {
    std::string name;
    Kind kind = Kind::nominal;
};

struct ResultSet {
    std::vector<ResultColumn> schema;
    std::vector<std::vector<Value>> rows;

    Table to_table() const;
};

/// Parquet bytes for a result set. Byte-stable for identical inputs.
std::string encode(const ResultSet& result);
/// Rows back from encoded bytes; kinds are not stored and come back nominal.
ResultSet decode(std::string_view bytes);

/// Throws StoreUnavailable when the schema is empty or the store fails.
ArtifactRef materialize(const ResultSet& result, const std::string& logical_name, ObjectStore& store,
                        ArtifactManifest* manifest = nullptr);

ArtifactRef put_report_asset(std::string_view bytes, ArtifactKind kind, const std::string& logical_name,
                             ObjectStore& store, ArtifactManifest* manifest = nullptr);

}  // namespace reportsmith::publisher
