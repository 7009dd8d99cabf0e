#include "reportsmith/deriver.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "reportsmith/error.hpp"
#include "reportsmith/json_util.hpp"

namespace reportsmith::deriver {

using nlohmann::json;
using nlohmann::ordered_json;
using sql::quote_ident;

namespace {

constexpr const char* kDraftInstructions =
    "Write one read-only SQLite SELECT over the relation `data` that answers the insight question. "
    "Answer with JSON {\"sql\": <query>, \"roles\": {<output column>: measure|dimension|time|detail}} "
    "giving every output column exactly one role. Use ORDER BY so the row order is deterministic.";

constexpr const char* kRepairInstructions =
    "The SQL below failed validation. Return a corrected query as JSON {\"sql\": ..., \"roles\": {...}} "
    "with exactly one role per output column.";

const std::set<std::string> kForbidden{"INSERT", "UPDATE", "DELETE", "CREATE", "DROP",   "ATTACH",
                                       "COPY",   "ALTER",  "PRAGMA", "DETACH", "VACUUM", "REPLACE"};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
    return s;
}

std::vector<std::string> quoted(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& n : names) out.push_back(quote_ident(n));
    return out;
}

std::string not_null(const std::vector<std::string>& names) {
    std::vector<std::string> parts;
    for (const auto& n : names) parts.push_back(quote_ident(n) + " IS NOT NULL");
    return join(parts, " AND ");
}

std::string schema_listing(const ingest::DatasetSchema& schema) {
    std::ostringstream s;
    s << "relation data (" << schema.row_count << " rows):";
    for (const auto& f : schema.fields) s << "\n- " << quote_ident(f.name) << " " << to_string(f.kind);
    return s.str();
}

Role default_role(Kind k) {
    switch (k) {
        case Kind::temporal: return Role::time;
        case Kind::quantitative: return Role::measure;
        default: return Role::dimension;
    }
}

// Replaces identifier `from` (bare or double-quoted) with `to`, leaving
// string literals and comments alone.
std::string replace_identifier(const std::string& sql, const std::string& from, const std::string& to) {
    std::string out;
    for (std::size_t i = 0; i < sql.size();) {
        const char c = sql[i];
        if (c == '\'') {
            std::size_t j = i + 1;
            while (j < sql.size()) {
                if (sql[j] == '\'' && j + 1 < sql.size() && sql[j + 1] == '\'') j += 2;
                else if (sql[j] == '\'') break;
                else ++j;
            }
            out.append(sql, i, j + 1 - i);
            i = j + 1;
            continue;
        }
        if (c == '"') {
            std::size_t j = i + 1;
            std::string inner;
            while (j < sql.size()) {
                if (sql[j] == '"' && j + 1 < sql.size() && sql[j + 1] == '"') {
                    inner += '"';
                    j += 2;
                } else if (sql[j] == '"') {
                    break;
                } else {
                    inner += sql[j++];
                }
            }
            if (inner == from) out += to;
            else out.append(sql, i, j + 1 - i);
            i = j + 1;
            continue;
        }
        if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            auto end = sql.find('\n', i);
            if (end == std::string::npos) end = sql.size();
            out.append(sql, i, end - i);
            i = end;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_')) ++j;
            std::string word = sql.substr(i, j - i);
            out += word == from ? to : word;
            i = j;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

CandidateQuery parse_candidate(const json& parsed) {
    CandidateQuery c;
    c.sql = parsed.at("sql").get<std::string>();
    for (const auto& [k, v] : parsed.at("roles").items()) c.roles.emplace_back(k, role_from_string(v.get<std::string>()));
    return c;
}

}  // namespace

std::optional<Role> CandidateQuery::role_of(const std::string& column) const {
    for (const auto& [c, r] : roles)
        if (c == column) return r;
    return std::nullopt;
}

ordered_json CandidateQuery::to_json() const {
    ordered_json j;
    j["sql"] = sql;
    j["roles"] = ordered_json::array();
    for (const auto& [c, r] : roles) j["roles"].push_back({{"column", c}, {"role", to_string(r)}});
    j["attempt"] = attempt;
    return j;
}

CandidateQuery CandidateQuery::from_json(const json& j) {
    CandidateQuery c;
    c.sql = j.at("sql").get<std::string>();
    for (const auto& r : j.at("roles"))
        c.roles.emplace_back(r.at("column").get<std::string>(), role_from_string(r.at("role").get<std::string>()));
    c.attempt = j.value("attempt", 0);
    return c;
}

CandidateQuery template_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema) {
    const auto times = plan.fields_with(Role::time);
    const auto measures = plan.fields_with(Role::measure);
    const auto dims = plan.fields_with(Role::dimension);
    const auto details = plan.fields_with(Role::detail);
    CandidateQuery c;
    std::vector<std::string> lines;

    auto aggregate = [&](std::vector<std::string>& select) {
        if (measures.empty()) {
            select.push_back("COUNT(*) AS n");
            c.roles.emplace_back("n", Role::measure);
        } else {
            const std::string alias = "mean_" + measures[0];
            select.push_back("AVG(" + quote_ident(measures[0]) + ") AS " + quote_ident(alias));
            c.roles.emplace_back(alias, Role::measure);
        }
    };

    switch (plan.task) {
        case Task::trend:
        case Task::comparison: {
            std::vector<std::string> keys;
            if (plan.task == Task::trend) {
                keys = times;
                if (keys.empty() && !dims.empty()) keys.push_back(dims[0]);
                for (const auto& k : keys) c.roles.emplace_back(k, plan.task == Task::trend && !times.empty() ? Role::time : Role::dimension);
                for (const auto& d : dims)
                    if (std::find(keys.begin(), keys.end(), d) == keys.end()) {
                        keys.push_back(d);
                        c.roles.emplace_back(d, Role::dimension);
                    }
            } else {
                keys = dims;
                for (const auto& k : keys) c.roles.emplace_back(k, Role::dimension);
                if (keys.empty())
                    for (const auto& t : times) {
                        keys.push_back(t);
                        c.roles.emplace_back(t, Role::time);
                    }
            }
            if (keys.empty()) keys.push_back(plan.fields.at(0).name), c.roles.emplace_back(keys[0], Role::dimension);
            auto select = quoted(keys);
            aggregate(select);
            lines.push_back("SELECT " + join(select, ", "));
            lines.push_back("FROM data");
            if (plan.task == Task::comparison) lines.push_back("WHERE " + not_null(keys));
            lines.push_back("GROUP BY " + join(quoted(keys), ", "));
            lines.push_back("ORDER BY " + join(quoted(keys), ", "));
            break;
        }
        case Task::distribution: {
            const auto& f = plan.fields.at(0).name;
            const auto* fs = schema.find(f);
            if (fs && fs->kind == Kind::quantitative) {
                lines = {"SELECT " + quote_ident(f), "FROM data", "WHERE " + not_null({f}), "ORDER BY " + quote_ident(f)};
                c.roles.emplace_back(f, Role::measure);
            } else {
                lines = {"SELECT " + quote_ident(f) + ", COUNT(*) AS n", "FROM data", "WHERE " + not_null({f}),
                         "GROUP BY " + quote_ident(f), "ORDER BY n DESC, " + quote_ident(f)};
                c.roles.emplace_back(f, Role::dimension);
                c.roles.emplace_back("n", Role::measure);
            }
            break;
        }
        case Task::correlation:
        case Task::outlier: {
            std::vector<std::string> cols;
            for (const auto& f : plan.fields) {
                cols.push_back(f.name);
                c.roles.emplace_back(f.name, f.role);
            }
            std::vector<std::string> required = measures;
            if (plan.task == Task::correlation && required.size() > 2) required.resize(2);
            if (plan.task == Task::outlier && required.size() > 1) required.resize(1);
            if (required.empty()) required.push_back(cols[0]);
            std::vector<std::string> order;
            if (plan.task == Task::outlier) {
                order.push_back(quote_ident(required[0]) + " DESC");
                for (const auto& col : cols)
                    if (col != required[0]) order.push_back(quote_ident(col));
            } else {
                order = quoted(cols);
            }
            lines = {"SELECT " + join(quoted(cols), ", "), "FROM data", "WHERE " + not_null(required),
                     "ORDER BY " + join(order, ", ")};
            break;
        }
        case Task::ranking: {
            std::string label = !dims.empty() ? dims[0] : !details.empty() ? details[0] : !times.empty() ? times[0] : "";
            if (label.empty()) label = plan.fields.at(0).name;
            const auto lr = plan.fields.empty() ? Role::dimension : [&] {
                for (const auto& f : plan.fields)
                    if (f.name == label) return f.role;
                return Role::dimension;
            }();
            c.roles.emplace_back(label, lr);
            if (measures.empty()) {
                lines = {"SELECT " + quote_ident(label) + ", COUNT(*) AS n", "FROM data", "WHERE " + not_null({label}),
                         "GROUP BY " + quote_ident(label), "ORDER BY n DESC, " + quote_ident(label), "LIMIT 20"};
                c.roles.emplace_back("n", Role::measure);
            } else {
                const auto& m = measures[0];
                lines = {"SELECT " + quote_ident(label) + ", " + quote_ident(m), "FROM data", "WHERE " + not_null({m}),
                         "ORDER BY " + quote_ident(m) + " DESC, " + quote_ident(label), "LIMIT 20"};
                c.roles.emplace_back(m, Role::measure);
            }
            break;
        }
        case Task::part_to_whole: {
            std::string d = !dims.empty() ? dims[0] : !times.empty() ? times[0] : plan.fields.at(0).name;
            c.roles.emplace_back(d, !dims.empty() || times.empty() ? Role::dimension : Role::time);
            const std::string share = measures.empty()
                                          ? "COUNT(*) * 1.0 / SUM(COUNT(*)) OVER () AS share"
                                          : "SUM(" + quote_ident(measures[0]) + ") * 1.0 / SUM(SUM(" +
                                                quote_ident(measures[0]) + ")) OVER () AS share";
            lines = {"SELECT " + quote_ident(d) + ", " + share, "FROM data", "WHERE " + not_null({d}),
                     "GROUP BY " + quote_ident(d), "ORDER BY share DESC, " + quote_ident(d)};
            c.roles.emplace_back("share", Role::measure);
            break;
        }
    }
    c.sql = join(lines, "\n");
    return c;
}

llm::GatewayRequest draft_request(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema) {
    llm::GatewayRequest req;
    req.role = llm::AgentRole::deriver;
    req.schema_id = "sql_candidate";
    req.text_parts = {kDraftInstructions, "plan: " + plan.to_json().dump(), schema_listing(schema)};
    return req;
}

llm::GatewayRequest repair_request(const CandidateQuery& candidate, const ValidationResult& validation,
                                   const ingest::DatasetSchema& schema) {
    llm::GatewayRequest req;
    req.role = llm::AgentRole::repairer;
    req.schema_id = "sql_candidate";
    req.text_parts = {kRepairInstructions, "sql:\n" + candidate.sql,
                      "error: " + validation.error_message.value_or("unknown error"), schema_listing(schema)};
    return req;
}

CandidateQuery draft_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema,
                           llm::Gateway* gateway, trace::Span& span) {
    if (gateway) {
        try {
            auto resp = gateway->complete(draft_request(plan, schema), span);
            auto c = parse_candidate(resp.parsed);
            span.set("draft_source", "llm");
            return c;
        } catch (const Error& e) {
            span.set("draft_fallback_reason", e.what());
        }
    }
    span.set("draft_source", "template");
    return template_query(plan, schema);
}

std::unique_ptr<sql::Engine> open_session(const Table& table) {
    auto e = std::make_unique<sql::Engine>();
    e->register_table("data", table);
    return e;
}

Kind infer_result_kind(const std::string& column, const std::vector<Value>& values, const ingest::DatasetSchema& schema) {
    bool any = false, all_numeric = true;
    for (const auto& v : values) {
        if (is_null(v)) continue;
        any = true;
        if (!is_numeric(v)) all_numeric = false;
    }
    if (const auto* f = schema.find(column)) {
        if (f->kind != Kind::quantitative || all_numeric) return f->kind;
    }
    return any && all_numeric ? Kind::quantitative : Kind::nominal;
}

ValidationResult validate_query(const std::string& sql_text, const sql::Engine& engine,
                                const ingest::DatasetSchema& schema, std::size_t row_cap) {
    ValidationResult v;
    auto fail = [&](std::string msg) {
        while (!msg.empty() && std::isspace(static_cast<unsigned char>(msg.back()))) msg.pop_back();
        v.ok = false;
        v.error_message = std::move(msg);
        return v;
    };
    const std::string text = sql::trim_statement(sql_text);
    if (text.empty()) return fail("empty query");
    for (const auto& tok : sql::keyword_tokens(text))
        if (kForbidden.contains(tok)) return fail("read-only violation: " + tok + " is not allowed");
    auto p = engine.prepare(text);
    if (!p.ok) return fail(p.error);
    std::set<std::string> names;
    for (const auto& c : p.columns)
        if (!names.insert(c).second) return fail("duplicate output column name '" + c + "'");
    try {
        auto count = engine.query("SELECT COUNT(*) FROM (\n" + text + "\n)");
        const auto n = static_cast<std::size_t>(std::get<std::int64_t>(count.rows.at(0).at(0)));
        if (n > row_cap)
            return fail("result has " + std::to_string(n) + " rows, exceeding the " + std::to_string(row_cap) +
                        "-row cap; narrow the query");
        v.row_count = n;
        auto sample = engine.query(text, 1000);
        for (std::size_t c = 0; c < sample.columns.size(); ++c) {
            std::vector<Value> col;
            for (const auto& r : sample.rows) col.push_back(r[c]);
            v.result_schema.push_back({sample.columns[c], infer_result_kind(sample.columns[c], col, schema)});
        }
    } catch (const Error& e) {
        return fail(e.detail());
    }
    v.ok = true;
    return v;
}

std::optional<std::string> check_roles(const CandidateQuery& candidate,
                                       const std::vector<publisher::ResultColumn>& result_schema) {
    for (const auto& col : result_schema) {
        const auto n = std::count_if(candidate.roles.begin(), candidate.roles.end(),
                                     [&](const auto& r) { return r.first == col.name; });
        if (n == 0) return "missing role for output column '" + col.name + "'";
        if (n > 1) return "output column '" + col.name + "' has more than one role";
    }
    for (const auto& [name, role] : candidate.roles)
        if (std::none_of(result_schema.begin(), result_schema.end(), [&](const auto& c) { return c.name == name; }))
            return "role given for unknown output column '" + name + "'";
    return std::nullopt;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

CandidateQuery stub_repair(const CandidateQuery& candidate, const ValidationResult& validation,
                           const ingest::DatasetSchema& schema) {
    CandidateQuery c = candidate;
    c.attempt = candidate.attempt + 1;
    const std::string err = validation.error_message.value_or("");
    static const std::regex no_column(R"(no such column: ([^\s]+))");
    static const std::regex no_table(R"(no such table: ([^\s]+))");
    std::smatch m;
    if (std::regex_search(err, m, no_column)) {
        std::string bad = m[1].str();
        if (auto dot = bad.rfind('.'); dot != std::string::npos) bad = bad.substr(dot + 1);
        const ingest::FieldSchema* best = nullptr;
        std::size_t best_d = 3;
        for (const auto& f : schema.fields) {
            const auto d = edit_distance(bad, f.name);
            if (d < best_d || (d == best_d && best && f.name < best->name)) {
                best_d = d;
                best = &f;
            }
        }
        if (best) {
            c.sql = replace_identifier(c.sql, bad, quote_ident(best->name));
            for (auto& [col, role] : c.roles)
                if (col == bad) col = best->name;
        }
    } else if (std::regex_search(err, m, no_table)) {
        c.sql = replace_identifier(c.sql, m[1].str(), "data");
    } else if (err.find("-row cap") != std::string::npos) {
        c.sql = "SELECT *\nFROM (\n" + sql::trim_statement(c.sql) + "\n)\nLIMIT " + std::to_string(kRowCap);
    } else if (err.find("role") != std::string::npos && !validation.result_schema.empty()) {
        c.roles.clear();
        for (const auto& col : validation.result_schema) c.roles.emplace_back(col.name, default_role(col.kind));
    }
    return c;
}

CandidateQuery repair_query(const CandidateQuery& candidate, const ValidationResult& validation,
                            const ingest::DatasetSchema& schema, llm::Gateway* gateway, trace::Span& span,
                            int max_attempts) {
    if (candidate.attempt >= max_attempts)
        throw Error(ErrorCode::RepairExhausted, "repair budget of " + std::to_string(max_attempts) + " attempts spent");
    if (gateway) {
        try {
            auto resp = gateway->complete(repair_request(candidate, validation, schema), span);
            auto c = parse_candidate(resp.parsed);
            c.attempt = candidate.attempt + 1;
            span.set("repair_source", "llm");
            return c;
        } catch (const Error& e) {
            span.set("repair_fallback_reason", e.what());
        }
    }
    span.set("repair_source", "fix_table");
    return stub_repair(candidate, validation, schema);
}

std::string with_canonical_order(const std::string& sql_text, std::size_t column_count) {
    const std::string text = sql::trim_statement(sql_text);
    if (sql::has_top_level_order_by(text) || column_count == 0) return text;
    std::vector<std::string> idx;
    for (std::size_t i = 1; i <= column_count; ++i) idx.push_back(std::to_string(i));
    return "SELECT *\nFROM (\n" + text + "\n)\nORDER BY " + join(idx, ", ");
}

ordered_json DerivedDataset::to_json(bool include_rows) const {
    ordered_json j;
    j["insight_id"] = insight_id;
    j["final_query"] = final_query.to_json();
    j["result_schema"] = ordered_json::array();
    for (const auto& c : result_schema) j["result_schema"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    j["artifact"] = artifact.to_json();
    j["mini_profile"] = ordered_json::array();
    for (const auto& f : mini_profile) j["mini_profile"].push_back(f.to_json());
    if (include_rows) {
        j["rows"] = ordered_json::array();
        for (const auto& r : rows.rows) {
            ordered_json row = ordered_json::array();
            for (const auto& v : r) row.push_back(value_to_json(v));
            j["rows"].push_back(std::move(row));
        }
    }
    return j;
}

DerivedDataset DerivedDataset::from_json(const json& j) {
    DerivedDataset d;
    d.insight_id = j.at("insight_id").get<std::string>();
    d.final_query = CandidateQuery::from_json(j.at("final_query"));
    for (const auto& c : j.at("result_schema"))
        d.result_schema.push_back({c.at("name").get<std::string>(), kind_from_string(c.at("kind").get<std::string>())});
    d.artifact = publisher::ArtifactRef::from_json(j.at("artifact"));
    for (const auto& f : j.at("mini_profile")) d.mini_profile.push_back(profiler::FieldProfile::from_json(f));
    d.rows.schema = d.result_schema;
    if (j.contains("rows"))
        for (const auto& r : j.at("rows")) {
            std::vector<Value> row;
            for (const auto& v : r) row.push_back(value_from_json(v));
            d.rows.rows.push_back(std::move(row));
        }
    return d;
}

QueryOutcome derive_query(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema,
                          const sql::Engine& engine, llm::Gateway* gateway, trace::Span& span, int max_attempts) {
    QueryOutcome out;
    auto full_validate = [&](const CandidateQuery& c) {
        auto v = validate_query(c.sql, engine, schema);
        if (v.ok) {
            if (auto e = check_roles(c, v.result_schema)) {
                v.ok = false;
                v.error_message = *e;
            }
        }
        return v;
    };

    CandidateQuery cand = draft_query(plan, schema, gateway, span);
    out.attempted_sql.push_back(cand.sql);
    ValidationResult v = full_validate(cand);
    while (!v.ok) {
        if (cand.attempt >= max_attempts) {
            Skipped s{plan.insight_id, "RepairExhausted", v.error_message.value_or(""), out.attempted_sql};
            span.degrade();
            span.set("skipped", true);
            span.set("last_error", s.last_error);
            span.set("attempted_sql", out.attempted_sql);
            out.skipped = std::move(s);
            return out;
        }
        auto r = span.child("repair", std::to_string(cand.attempt + 1));
        r.set("span_kind", "repair");
        r.set_role("repairer");
        r.set("attempt", cand.attempt + 1);
        r.set("failing_sql", cand.sql);
        r.set("error", v.error_message.value_or(""));
        cand = repair_query(cand, v, schema, gateway, r, max_attempts);
        out.attempted_sql.push_back(cand.sql);
        v = full_validate(cand);
        r.set("sql", cand.sql);
        if (!v.ok) r.fail(v.error_message.value_or(""));
    }
    cand.sql = with_canonical_order(cand.sql, v.result_schema.size());
    span.set("repairs", cand.attempt);
    span.set("sql", cand.sql);
    out.query = std::move(cand);
    out.result_schema = std::move(v.result_schema);
    return out;
}

DerivedDataset materialize(const std::string& insight_id, const CandidateQuery& query,
                           const ingest::DatasetSchema& schema, const sql::Engine& engine,
                           publisher::ObjectStore& store, publisher::ArtifactManifest* manifest, trace::Span& span) {
    auto result = engine.query(query.sql);
    DerivedDataset d;
    d.insight_id = insight_id;
    d.final_query = query;
    for (std::size_t c = 0; c < result.columns.size(); ++c) {
        std::vector<Value> col;
        col.reserve(result.rows.size());
        for (const auto& row : result.rows) col.push_back(row[c]);
        d.result_schema.push_back({result.columns[c], infer_result_kind(result.columns[c], col, schema)});
    }
    d.rows.schema = d.result_schema;
    d.rows.rows = std::move(result.rows);
    d.artifact = publisher::materialize(d.rows, insight_id, store, manifest);
    d.mini_profile = profiler::profile_fields(d.rows.to_table());
    span.set("row_count", d.rows.rows.size());
    span.set("artifact", d.artifact.store_key);
    span.set_output_digest(d.artifact.digest);
    return d;
}

DeriveOutcome derive(const planner::InsightPlan& plan, const ingest::DatasetSchema& schema, const Table& table,
                     llm::Gateway* gateway, publisher::ObjectStore& store, publisher::ArtifactManifest* manifest,
                     trace::Span& span, int max_attempts) {
    DeriveOutcome out;
    auto engine = open_session(table);
    auto q = derive_query(plan, schema, *engine, gateway, span, max_attempts);
    out.attempted_sql = q.attempted_sql;
    if (q.skipped) {
        out.skipped = std::move(q.skipped);
        return out;
    }
    out.derived = materialize(plan.insight_id, *q.query, schema, *engine, store, manifest, span);
    return out;
}

}  // namespace reportsmith::deriver
