#include "reportsmith/publisher.hpp"

#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/parquet.hpp"

namespace reportsmith::publisher {

namespace {

constexpr std::pair<ArtifactKind, std::string_view> kKinds[] = {
    {ArtifactKind::derived_parquet, "derived_parquet"},
    {ArtifactKind::chart_json, "chart_json"},
    {ArtifactKind::report_manifest, "report_manifest"},
    {ArtifactKind::trace_doc, "trace_doc"},
    {ArtifactKind::html_bundle_member, "html_bundle_member"},
};

std::string_view extension_for(ArtifactKind k, std::string_view logical_name) {
    switch (k) {
        case ArtifactKind::derived_parquet: return ".parquet";
        case ArtifactKind::chart_json:
        case ArtifactKind::report_manifest: return ".json";
        case ArtifactKind::trace_doc: return ".md";
        case ArtifactKind::html_bundle_member: {
            auto dot = logical_name.rfind('.');
            auto slash = logical_name.rfind('/');
            if (dot == std::string_view::npos || (slash != std::string_view::npos && dot < slash)) return "";
            return logical_name.substr(dot);
        }
    }
    return "";
}

bool same(const ArtifactRef& a, const ArtifactRef& b) {
    return a.digest == b.digest && a.kind == b.kind && a.logical_name == b.logical_name;
}

}  // namespace

std::string_view to_string(ArtifactKind k) {
    for (auto [kind, name] : kKinds)
        if (kind == k) return name;
    return "derived_parquet";
}

ArtifactKind artifact_kind_from_string(std::string_view s) {
    for (auto [kind, name] : kKinds)
        if (name == s) return kind;
    throw Error(ErrorCode::ParseError, "unknown artifact kind " + std::string(s));
}

nlohmann::ordered_json ArtifactRef::to_json() const {
    nlohmann::ordered_json j;
    j["digest"] = digest;
    j["kind"] = to_string(kind);
    j["logical_name"] = logical_name;
    j["byte_size"] = byte_size;
    j["store_key"] = store_key;
    if (row_count) j["row_count"] = *row_count;
    return j;
}

ArtifactRef ArtifactRef::from_json(const nlohmann::json& j) {
    ArtifactRef r;
    r.digest = j.at("digest").get<std::string>();
    r.kind = artifact_kind_from_string(j.at("kind").get<std::string>());
    r.logical_name = j.at("logical_name").get<std::string>();
    r.byte_size = j.at("byte_size").get<std::size_t>();
    r.store_key = j.at("store_key").get<std::string>();
    if (j.contains("row_count")) r.row_count = j.at("row_count").get<std::size_t>();
    return r;
}

std::string content_key(std::string_view bytes) { return sha256_hex(bytes); }

std::string store_key(const std::string& digest, std::string_view extension) {
    return "artifacts/" + digest.substr(0, 2) + "/" + digest + std::string(extension);
}

FilesystemStore::FilesystemStore(std::filesystem::path root) : root_(std::move(root)) {}

bool FilesystemStore::put(const std::string& key, std::string_view bytes) {
    auto path = root_ / key;
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return false;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::StoreUnavailable, "cannot create " + path.parent_path().string() + ": " + ec.message());
    write_file_atomic(path, bytes);
    return true;
}

std::optional<std::string> FilesystemStore::get(const std::string& key) const {
    auto path = root_ / key;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
    return read_file(path);
}

bool FilesystemStore::exists(const std::string& key) const {
    std::error_code ec;
    return std::filesystem::is_regular_file(root_ / key, ec);
}

void ArtifactManifest::add(const ArtifactRef& ref) {
    std::lock_guard lock(mu_);
    for (const auto& r : refs_)
        if (same(r, ref)) return;
    refs_.push_back(ref);
}

std::vector<ArtifactRef> ArtifactManifest::refs() const {
    std::lock_guard lock(mu_);
    return refs_;
}

nlohmann::ordered_json ArtifactManifest::to_json() const {
    auto j = nlohmann::ordered_json::array();
    for (const auto& r : refs()) j.push_back(r.to_json());
    return j;
}

Table ResultSet::to_table() const {
    Table t;
    t.row_count = rows.size();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        TypedColumn col{schema[c].name, schema[c].kind, {}};
        col.values.reserve(rows.size());
        for (const auto& r : rows) col.values.push_back(r[c]);
        t.columns.push_back(std::move(col));
    }
    return t;
}

std::string encode(const ResultSet& result) {
    std::vector<parquet::ColumnData> cols;
    cols.reserve(result.schema.size());
    for (std::size_t c = 0; c < result.schema.size(); ++c) {
        parquet::ColumnData cd;
        cd.name = result.schema[c].name;
        cd.values.reserve(result.rows.size());
        for (const auto& r : result.rows) cd.values.push_back(r[c]);
        cd.type = parquet::infer_type(cd.values);
        cols.push_back(std::move(cd));
    }
    return parquet::write(cols, result.rows.size());
}

ResultSet decode(std::string_view bytes) {
    auto file = parquet::read(bytes);
    ResultSet rs;
    for (const auto& c : file.columns) rs.schema.push_back({c.name, Kind::nominal});
    rs.rows.assign(file.num_rows, std::vector<Value>(file.columns.size()));
    for (std::size_t c = 0; c < file.columns.size(); ++c)
        for (std::size_t r = 0; r < file.num_rows; ++r) rs.rows[r][c] = file.columns[c].values[r];
    return rs;
}

ArtifactRef materialize(const ResultSet& result, const std::string& logical_name, ObjectStore& store,
                        ArtifactManifest* manifest) {
    if (result.schema.empty()) throw Error(ErrorCode::StoreUnavailable, "cannot materialize an empty result schema");
    std::string bytes = encode(result);
    ArtifactRef ref;
    ref.digest = content_key(bytes);
    ref.kind = ArtifactKind::derived_parquet;
    ref.logical_name = logical_name;
    ref.byte_size = bytes.size();
    ref.store_key = store_key(ref.digest, ".parquet");
    ref.row_count = result.rows.size();
    store.put(ref.store_key, bytes);
    if (manifest) manifest->add(ref);
    return ref;
}

ArtifactRef put_report_asset(std::string_view bytes, ArtifactKind kind, const std::string& logical_name,
                             ObjectStore& store, ArtifactManifest* manifest) {
    ArtifactRef ref;
    ref.digest = content_key(bytes);
    ref.kind = kind;
    ref.logical_name = logical_name;
    ref.byte_size = bytes.size();
    ref.store_key = store_key(ref.digest, extension_for(kind, logical_name));
    store.put(ref.store_key, bytes);
    if (manifest) manifest->add(ref);
    return ref;
}

}  // namespace reportsmith::publisher
