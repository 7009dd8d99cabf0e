#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reportsmith/value.hpp"

struct sqlite3;

namespace reportsmith::sql {

struct QueryResult {
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;
};

/// In-memory embedded engine session (SQLite). Double-quoted strings are
/// identifiers only, so a misspelt quoted column fails instead of turning
/// into a string literal.
class Engine {
public:
    Engine();
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Creates relation `name` with one column per typed column and loads the rows.
    void register_table(const std::string& name, const Table& table);

    /// Compiles without executing. Returns the output column names, or the
    /// engine error text.
    struct Prepared {
        bool ok = false;
        std::vector<std::string> columns;
        std::string error;
    };
    Prepared prepare(std::string_view sql) const;

    /// Executes a single SELECT; throws ParseError carrying the engine message on failure.
    QueryResult query(std::string_view sql, std::optional<std::size_t> max_rows = std::nullopt) const;

private:
    sqlite3* db_ = nullptr;
};

/// SQL identifier, double-quoted only when it is not a plain word.
std::string quote_ident(std::string_view name);

/// Strips whitespace and trailing semicolons.
std::string trim_statement(std::string_view sql);

/// Upper-cased words outside string literals, quoted identifiers and comments.
std::vector<std::string> keyword_tokens(std::string_view sql);

/// Whether an ORDER BY appears at parenthesis depth 0.
bool has_top_level_order_by(std::string_view sql);

}  // namespace reportsmith::sql
