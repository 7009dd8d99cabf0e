#include "reportsmith/sql_engine.hpp"

#include <sqlite3.h>

#include <cctype>
#include <set>

#include "reportsmith/error.hpp"

namespace reportsmith::sql {

namespace {

struct Token {
    std::string upper;
    int depth;
};

// Words (identifiers/keywords) with their parenthesis depth. String literals,
// quoted identifiers and comments are skipped.
std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    int depth = 0;
    for (std::size_t i = 0; i < s.size();) {
        char c = s[i];
        if (c == '\'' || c == '"' || c == '`' || c == '[') {
            char close = c == '[' ? ']' : c;
            ++i;
            while (i < s.size()) {
                if (s[i] == close) {
                    if (close != ']' && i + 1 < s.size() && s[i + 1] == close) {
                        i += 2;
                        continue;
                    }
                    break;
                }
                ++i;
            }
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            auto end = s.find("*/", i + 2);
            i = end == std::string_view::npos ? s.size() : end + 2;
            continue;
        }
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            std::string w;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
                w.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(s[j++]))));
            out.push_back({w, depth});
            i = j;
            continue;
        }
        ++i;
    }
    return out;
}

void check(int rc, sqlite3* db, const char* what) {
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW)
        throw Error(ErrorCode::ParseError, std::string(what) + ": " + sqlite3_errmsg(db));
}

std::string rtrim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

struct Stmt {
    sqlite3_stmt* s = nullptr;
    ~Stmt() { sqlite3_finalize(s); }
};

}  // namespace

std::string quote_ident(std::string_view name) {
    static const std::set<std::string> reserved{"SELECT", "FROM",  "WHERE", "GROUP", "ORDER", "BY",    "LIMIT",
                                                "AS",     "AND",   "OR",    "NOT",   "NULL",  "TABLE", "INDEX",
                                                "JOIN",   "ON",    "CASE",  "WHEN",  "THEN",  "ELSE",  "END",
                                                "IN",     "IS",    "LIKE",  "UNION", "WITH",  "HAVING", "DESC",
                                                "ASC",    "DISTINCT", "ALL", "VALUES", "OVER", "PARTITION"};
    bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
    std::string upper;
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) plain = false;
        upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (plain && !reserved.contains(upper)) return std::string(name);
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

std::string trim_statement(std::string_view sql) {
    std::string s(sql);
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    s = s.substr(b);
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == ';')) s.pop_back();
    return s;
}

std::vector<std::string> keyword_tokens(std::string_view sql) {
    std::vector<std::string> out;
    for (auto& t : tokenize(sql)) out.push_back(std::move(t.upper));
    return out;
}

bool has_top_level_order_by(std::string_view sql) {
    auto toks = tokenize(sql);
    for (std::size_t i = 0; i + 1 < toks.size(); ++i)
        if (toks[i].depth == 0 && toks[i].upper == "ORDER" && toks[i + 1].upper == "BY") return true;
    return false;
}

Engine::Engine() {
    if (sqlite3_open_v2(":memory:", &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_NOMUTEX, nullptr) !=
        SQLITE_OK)
        throw Error(ErrorCode::StoreUnavailable, "cannot open in-memory SQL engine");
    sqlite3_db_config(db_, SQLITE_DBCONFIG_DQS_DML, 0, nullptr);
    sqlite3_db_config(db_, SQLITE_DBCONFIG_DQS_DDL, 0, nullptr);
}

Engine::~Engine() { sqlite3_close(db_); }

void Engine::register_table(const std::string& name, const Table& table) {
    std::string ddl = "CREATE TABLE " + quote_ident(name) + " (";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        const auto& c = table.columns[i];
        bool any_double = false, any_text = false;
        for (const auto& v : c.values) {
            any_double |= std::holds_alternative<double>(v);
            any_text |= std::holds_alternative<std::string>(v);
        }
        const char* type = any_text ? "TEXT" : any_double ? "REAL" : "INTEGER";
        if (c.kind != Kind::quantitative && c.kind != Kind::temporal) type = any_text ? "TEXT" : type;
        if (i) ddl += ", ";
        ddl += quote_ident(c.name) + " " + type;
    }
    ddl += ")";
    check(sqlite3_exec(db_, ddl.c_str(), nullptr, nullptr, nullptr), db_, "create");

    std::string ins = "INSERT INTO " + quote_ident(name) + " VALUES (";
    for (std::size_t i = 0; i < table.columns.size(); ++i) ins += i ? ",?" : "?";
    ins += ")";
    check(sqlite3_exec(db_, "BEGIN", nullptr, nullptr, nullptr), db_, "begin");
    Stmt st;
    check(sqlite3_prepare_v2(db_, ins.c_str(), -1, &st.s, nullptr), db_, "prepare insert");
    for (std::size_t r = 0; r < table.row_count; ++r) {
        sqlite3_reset(st.s);
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            const Value& v = table.columns[c].values[r];
            const int idx = static_cast<int>(c) + 1;
            if (const auto* i = std::get_if<std::int64_t>(&v)) sqlite3_bind_int64(st.s, idx, *i);
            else if (const auto* d = std::get_if<double>(&v)) sqlite3_bind_double(st.s, idx, *d);
            else if (const auto* s = std::get_if<std::string>(&v))
                sqlite3_bind_text(st.s, idx, s->data(), static_cast<int>(s->size()), SQLITE_TRANSIENT);
            else sqlite3_bind_null(st.s, idx);
        }
        check(sqlite3_step(st.s), db_, "insert");
    }
    check(sqlite3_exec(db_, "COMMIT", nullptr, nullptr, nullptr), db_, "commit");
}

Engine::Prepared Engine::prepare(std::string_view sql) const {
    Prepared p;
    const std::string text = trim_statement(sql);
    Stmt st;
    const char* tail = nullptr;
    if (sqlite3_prepare_v2(db_, text.c_str(), -1, &st.s, &tail) != SQLITE_OK) {
        p.error = rtrim(sqlite3_errmsg(db_));
        return p;
    }
    if (!st.s) {
        p.error = "empty statement";
        return p;
    }
    if (tail && std::string_view(tail).find_first_not_of(" \t\r\n;") != std::string_view::npos) {
        p.error = "multiple statements are not allowed";
        return p;
    }
    if (!sqlite3_stmt_readonly(st.s)) {
        p.error = "statement is not read-only";
        return p;
    }
    const int n = sqlite3_column_count(st.s);
    if (n == 0) {
        p.error = "statement returns no columns";
        return p;
    }
    for (int i = 0; i < n; ++i) p.columns.emplace_back(sqlite3_column_name(st.s, i));
    p.ok = true;
    return p;
}

QueryResult Engine::query(std::string_view sql, std::optional<std::size_t> max_rows) const {
    QueryResult out;
    const std::string text = trim_statement(sql);
    Stmt st;
    if (sqlite3_prepare_v2(db_, text.c_str(), -1, &st.s, nullptr) != SQLITE_OK || !st.s)
        throw Error(ErrorCode::ParseError, rtrim(sqlite3_errmsg(db_)));
    const int n = sqlite3_column_count(st.s);
    for (int i = 0; i < n; ++i) out.columns.emplace_back(sqlite3_column_name(st.s, i));
    while (true) {
        if (max_rows && out.rows.size() >= *max_rows) break;
        int rc = sqlite3_step(st.s);
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) throw Error(ErrorCode::ParseError, rtrim(sqlite3_errmsg(db_)));
        std::vector<Value> row;
        row.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            switch (sqlite3_column_type(st.s, i)) {
                case SQLITE_INTEGER: row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(st.s, i))); break;
                case SQLITE_FLOAT: row.emplace_back(sqlite3_column_double(st.s, i)); break;
                case SQLITE_NULL: row.emplace_back(); break;
                default: {
                    auto* t = reinterpret_cast<const char*>(sqlite3_column_text(st.s, i));
                    row.emplace_back(std::string(t ? t : "", static_cast<std::size_t>(sqlite3_column_bytes(st.s, i))));
                }
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace reportsmith::sql
