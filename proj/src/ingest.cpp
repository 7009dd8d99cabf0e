#include "reportsmith/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <regex>
#include <set>
#include <unordered_set>

#include "reportsmith/csv.hpp"
#include "reportsmith/digest.hpp"
#include "reportsmith/error.hpp"
#include "reportsmith/io.hpp"
#include "reportsmith/parquet.hpp"

namespace reportsmith::ingest {

using nlohmann::json;
using nlohmann::ordered_json;

// ------------------------------------------------------------------ schema json

ordered_json FieldSchema::to_json() const {
    ordered_json j;
    j["name"] = name;
    j["kind"] = to_string(kind);
    j["unit_hint"] = unit_hint ? ordered_json(*unit_hint) : ordered_json(nullptr);
    j["description"] = description;
    if (code_dictionary) {
        ordered_json d = ordered_json::object();
        for (const auto& [k, v] : *code_dictionary) d[k] = v;
        j["code_dictionary"] = d;
    } else {
        j["code_dictionary"] = nullptr;
    }
    if (!rank.empty()) j["rank"] = rank;
    return j;
}

FieldSchema FieldSchema::from_json(const json& j) {
    FieldSchema f;
    f.name = j.at("name").get<std::string>();
    f.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("unit_hint") && !j["unit_hint"].is_null()) f.unit_hint = j["unit_hint"].get<std::string>();
    f.description = j.value("description", "");
    if (j.contains("code_dictionary") && !j["code_dictionary"].is_null())
        f.code_dictionary = j["code_dictionary"].get<std::map<std::string, std::string>>();
    if (j.contains("rank")) f.rank = j["rank"].get<std::vector<std::string>>();
    return f;
}

const FieldSchema* DatasetSchema::find(std::string_view name) const {
    for (const auto& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

ordered_json DatasetSchema::to_json() const {
    ordered_json j;
    j["dataset_digest"] = dataset_digest;
    j["row_count"] = row_count;
    j["description"] = description;
    j["fields"] = ordered_json::array();
    for (const auto& f : fields) j["fields"].push_back(f.to_json());
    return j;
}

DatasetSchema DatasetSchema::from_json(const json& j) {
    DatasetSchema s;
    s.dataset_digest = j.at("dataset_digest").get<std::string>();
    s.row_count = j.at("row_count").get<std::size_t>();
    s.description = j.at("description").get<std::string>();
    for (const auto& f : j.at("fields")) s.fields.push_back(FieldSchema::from_json(f));
    return s;
}

// ------------------------------------------------------------------ loading

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::vector<std::string> unique_names(std::vector<std::string> names) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::string n = trim(names[i]);
        if (n.empty()) n = "column_" + std::to_string(i + 1);
        std::string candidate = n;
        for (int k = 2; seen.contains(candidate); ++k) candidate = n + "_" + std::to_string(k);
        seen.insert(candidate);
        names[i] = candidate;
    }
    return names;
}

}  // namespace

RawTable parse_csv_table(std::string_view text, std::string source_uri) {
    auto rows = csv::parse(text);
    // Blank lines parse as a single empty field; drop them.
    std::erase_if(rows, [](const auto& r) { return r.size() == 1 && r[0].empty(); });
    if (rows.empty() || rows[0].empty()) throw Error(ErrorCode::EmptyDataset, source_uri + " has no columns");
    auto names = unique_names(rows[0]);
    RawTable t;
    t.source_uri = std::move(source_uri);
    t.row_count = rows.size() - 1;
    t.columns.resize(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        t.columns[c].name = names[c];
        t.columns[c].cells.reserve(t.row_count);
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() > names.size())
            throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " has more fields than the header");
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (c < rows[r].size()) t.columns[c].cells.emplace_back(rows[r][c]);
            else t.columns[c].cells.emplace_back(std::nullopt);
        }
    }
    return t;
}

RawTable parse_parquet_table(std::string_view bytes, std::string source_uri) {
    auto file = parquet::read(bytes);
    if (file.columns.empty()) throw Error(ErrorCode::EmptyDataset, source_uri + " has no columns");
    std::vector<std::string> names;
    for (const auto& c : file.columns) names.push_back(c.name);
    names = unique_names(names);
    RawTable t;
    t.source_uri = std::move(source_uri);
    t.row_count = file.num_rows;
    for (std::size_t c = 0; c < file.columns.size(); ++c) {
        RawColumn col;
        col.name = names[c];
        for (const auto& v : file.columns[c].values) {
            if (is_null(v)) col.cells.emplace_back(std::nullopt);
            else col.cells.emplace_back(to_text(v));
        }
        t.columns.push_back(std::move(col));
    }
    return t;
}

RawTable load_dataset(const std::string& uri, std::optional<Format> format_hint) {
    std::string path = uri;
    if (path.rfind("file://", 0) == 0) path = path.substr(7);
    else if (path.find("://") != std::string::npos)
        throw Error(ErrorCode::UnreadableSource, "only local files are supported: " + uri);

    Format fmt;
    if (format_hint) {
        fmt = *format_hint;
    } else {
        auto ext = lower(std::filesystem::path(path).extension().string());
        if (ext == ".csv") fmt = Format::csv;
        else if (ext == ".parquet" || ext == ".pq") fmt = Format::parquet;
        else throw Error(ErrorCode::UnsupportedFormat, "cannot infer format of " + uri);
    }
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error&) {
        throw Error(ErrorCode::UnreadableSource, "cannot read " + uri);
    }
    if (fmt == Format::csv) {
        if (trim(bytes).empty()) throw Error(ErrorCode::EmptyDataset, uri + " is empty");
        return parse_csv_table(bytes, uri);
    }
    return parse_parquet_table(bytes, uri);
}

std::string table_digest(const RawTable& table) {
    json j = json::array();
    for (const auto& c : table.columns) {
        json cells = json::array();
        for (const auto& cell : c.cells) cells.push_back(cell ? json(*cell) : json(nullptr));
        j.push_back({{"name", c.name}, {"cells", cells}});
    }
    return json_digest(j);
}

// ------------------------------------------------------------------ refinement

RawTable clean(const RawTable& table, const Options& opts) {
    std::unordered_set<std::string> sentinels(opts.null_sentinels.begin(), opts.null_sentinels.end());
    RawTable out;
    out.source_uri = table.source_uri;
    out.row_count = table.row_count;
    for (const auto& col : table.columns) {
        RawColumn c;
        c.name = col.name;
        c.cells.reserve(col.cells.size());
        for (const auto& cell : col.cells) {
            if (!cell) {
                c.cells.emplace_back(std::nullopt);
                continue;
            }
            std::string t = trim(*cell);
            if (sentinels.contains(t)) c.cells.emplace_back(std::nullopt);
            else c.cells.emplace_back(std::move(t));
        }
        out.columns.push_back(std::move(c));
    }
    return out;
}

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_number(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool is_iso_date(const std::string& s) {
    static const std::regex re(
        R"(^(\d{4})-(\d{2})-(\d{2})([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) return false;
    int month = std::stoi(m[2]), day = std::stoi(m[3]);
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

bool name_suggests_time(const std::string& name) {
    static const std::regex re("year|date", std::regex::icase);
    return std::regex_search(name, re);
}

std::vector<std::string> non_null(const RawColumn& col) {
    std::vector<std::string> v;
    for (const auto& c : col.cells)
        if (c) v.push_back(*c);
    return v;
}

constexpr double kParseShare = 0.95;
constexpr double kIdentifierDistinctRatio = 0.95;
constexpr std::size_t kIdentifierMinValues = 20;

Kind classify(const RawColumn& col) {
    auto values = non_null(col);
    if (values.empty()) return Kind::nominal;

    static const std::set<std::string> boolean_tokens{"true", "false", "0", "1", "yes", "no"};
    std::set<std::string> distinct(values.begin(), values.end());
    if (std::all_of(distinct.begin(), distinct.end(), [](const auto& v) { return boolean_tokens.contains(lower(v)); }))
        return Kind::boolean;

    const double n = static_cast<double>(values.size());
    auto share = [&](auto pred) {
        return static_cast<double>(std::count_if(values.begin(), values.end(), pred)) / n;
    };
    if (share([](const std::string& v) { return is_iso_date(v); }) >= kParseShare) return Kind::temporal;
    if (name_suggests_time(col.name) && std::all_of(values.begin(), values.end(), [](const std::string& v) {
            auto i = parse_int(v);
            return i && *i >= 1678 && *i <= 2262;
        }))
        return Kind::temporal;
    if (share([](const std::string& v) { return parse_number(v).has_value(); }) >= kParseShare)
        return Kind::quantitative;
    if (values.size() >= kIdentifierMinValues && static_cast<double>(distinct.size()) / n >= kIdentifierDistinctRatio)
        return Kind::identifier;
    return Kind::nominal;
}

std::optional<std::string> unit_from_name(const std::string& name) {
    static const std::regex re(R"(\(([^()]+)\)\s*$|\[([^\[\]]+)\]\s*$)");
    std::smatch m;
    if (std::regex_search(name, m, re)) return m[1].matched ? m[1].str() : m[2].str();
    return std::nullopt;
}

std::string field_description(const FieldSchema& f, std::size_t distinct) {
    std::string d = f.name + ": " + std::string(to_string(f.kind)) + " field with " + std::to_string(distinct) +
                    " distinct values";
    if (f.unit_hint) d += " (unit " + *f.unit_hint + ")";
    return d;
}

}  // namespace

std::vector<FieldSchema> refine_fields(const RawTable& table, const Options& opts) {
    RawTable cleaned = clean(table, opts);
    std::vector<FieldSchema> out(cleaned.columns.size());
    // Columns are independent; the loop body touches only its own slot.
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < cleaned.columns.size(); ++i) {
        const auto& col = cleaned.columns[i];
        FieldSchema f;
        f.name = col.name;
        f.kind = classify(col);
        f.unit_hint = unit_from_name(col.name);
        auto values = non_null(col);
        std::set<std::string> distinct(values.begin(), values.end());
        f.description = field_description(f, distinct.size());
        out[i] = std::move(f);
    }
    return out;
}

Table apply_schema(const RawTable& cleaned, const std::vector<FieldSchema>& fields) {
    Table t;
    t.row_count = cleaned.row_count;
    for (const auto& f : fields) {
        const RawColumn* col = nullptr;
        for (const auto& c : cleaned.columns)
            if (c.name == f.name) col = &c;
        if (!col) throw Error(ErrorCode::UnknownField, "schema field " + f.name + " missing from table");
        TypedColumn tc;
        tc.name = f.name;
        tc.kind = f.kind;
        tc.values.reserve(col->cells.size());
        for (const auto& cell : col->cells) {
            if (!cell) {
                tc.values.emplace_back();
                continue;
            }
            if (f.kind == Kind::quantitative || f.kind == Kind::temporal) {
                if (auto i = parse_int(*cell)) {
                    tc.values.emplace_back(*i);
                    continue;
                }
                if (f.kind == Kind::quantitative) {
                    if (auto d = parse_number(*cell)) tc.values.emplace_back(*d);
                    else tc.values.emplace_back();
                    continue;
                }
            }
            tc.values.emplace_back(*cell);
        }
        t.columns.push_back(std::move(tc));
    }
    return t;
}

std::vector<std::string> distinct_samples(const RawColumn& column, std::size_t limit) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& c : column.cells) {
        if (!c || seen.contains(*c)) continue;
        seen.insert(*c);
        out.push_back(*c);
        if (out.size() >= limit) break;
    }
    return out;
}

bool is_cryptic_token(std::string_view v) {
    if (v.empty() || v.size() > 3) return false;
    return std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isupper(c) || std::isdigit(c); });
}

// ------------------------------------------------------------------ knowledge

FixtureKnowledge::FixtureKnowledge(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<FieldKnowledge> FixtureKnowledge::lookup(const std::string& field) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir_, ec))
        throw Error(ErrorCode::KnowledgeSourceUnavailable, "knowledge directory " + dir_.string() + " is missing");
    auto p = dir_ / (field + ".json");
    if (!std::filesystem::exists(p, ec)) return std::nullopt;
    FieldKnowledge k;
    try {
        json j = json::parse(read_file(p));
        for (const auto& [code, label] : j.items()) {
            if (code == "__rank__") {
                k.rank = label.get<std::vector<std::string>>();
                continue;
            }
            if (label.is_string()) k.labels[code] = label.get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::KnowledgeSourceUnavailable, p.string() + ": " + e.what());
    }
    return k;
}

FieldSchema expand_codes(const FieldSchema& field, const std::vector<std::string>& samples, KnowledgeSource* knowledge,
                         trace::Span& span) {
    if (!knowledge || (field.kind != Kind::nominal && field.kind != Kind::ordinal)) return field;

    std::vector<std::string> cryptic;
    for (const auto& s : samples)
        if (is_cryptic_token(s)) cryptic.push_back(s);
    const bool mostly_cryptic = !samples.empty() && cryptic.size() * 2 >= samples.size();
    const std::vector<std::string>& queried = mostly_cryptic ? samples : cryptic;
    if (queried.empty()) return field;

    std::optional<FieldKnowledge> k;
    try {
        k = knowledge->lookup(field.name);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::KnowledgeSourceUnavailable) throw;
        auto warn = span.child("warning:expand_codes", "warning:" + field.name);
        warn.set("span_kind", "warning");
        warn.set("field", field.name);
        warn.set("warning", e.what());
        warn.set_status(trace::Status::degraded);
        return field;
    }
    if (!k) return field;

    FieldSchema out = field;
    std::map<std::string, std::string> dict;
    for (const auto& v : queried)
        if (auto it = k->labels.find(v); it != k->labels.end()) dict[v] = it->second;
    if (!dict.empty()) {
        out.code_dictionary = dict;
        out.description += "; codes: ";
        bool first = true;
        for (const auto& [code, label] : dict) {
            if (!first) out.description += ", ";
            first = false;
            out.description += code + "=" + label;
        }
    }
    if (!k->rank.empty()) {
        // A declared level order is the only route to the ordinal kind.
        std::set<std::string> present(samples.begin(), samples.end());
        for (const auto& r : k->rank)
            if (present.contains(r)) out.rank.push_back(r);
        if (!out.rank.empty()) out.kind = Kind::ordinal;
    }
    return out;
}

// ------------------------------------------------------------------ description

std::string template_description(const std::vector<FieldSchema>& fields, std::size_t row_count) {
    std::string d = "Dataset with " + std::to_string(row_count) + " rows and fields: ";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) d += ", ";
        d += fields[i].name + " (" + std::string(to_string(fields[i].kind)) + ")";
    }
    d += ".";
    return d;
}

llm::GatewayRequest describe_request(const std::vector<FieldSchema>& fields, const RawTable& cleaned) {
    llm::GatewayRequest req;
    req.role = llm::AgentRole::describer;
    req.schema_id = "dataset_description";
    std::string schema = "Fields:\n";
    for (const auto& f : fields) schema += "- " + f.description + "\n";
    std::string sample = "Sample rows:\n";
    const std::size_t n = std::min<std::size_t>(cleaned.row_count, 5);
    for (std::size_t r = 0; r < n; ++r) {
        json row = json::object();
        for (const auto& c : cleaned.columns) row[c.name] = c.cells[r] ? json(*c.cells[r]) : json(nullptr);
        sample += row.dump() + "\n";
    }
    req.text_parts = {"Summarize this dataset in two or three sentences for a report reader.", schema, sample};
    return req;
}

DatasetSchema describe_dataset(std::vector<FieldSchema> fields, const RawTable& cleaned, llm::Gateway* gateway,
                               trace::Span& span) {
    DatasetSchema s;
    s.dataset_digest = table_digest(cleaned);
    s.row_count = cleaned.row_count;
    s.description = template_description(fields, cleaned.row_count);
    if (gateway) {
        try {
            auto resp = gateway->complete(describe_request(fields, cleaned), span);
            s.description = resp.parsed.get<std::string>();
        } catch (const Error&) {
            span.degrade();
            span.set("describe_fallback", "template");
        }
    }
    s.fields = std::move(fields);
    return s;
}

}  // namespace reportsmith::ingest
