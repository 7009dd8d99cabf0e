#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace reportsmith {

/// Nullable scalar cell of a typed table.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }
inline bool is_numeric(const Value& v) {
    return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}
std::optional<double> as_double(const Value& v);

/// Text form used for CSV/JSON export and as a frequency key. Doubles use the
/// shortest representation that round-trips.
std::string to_text(const Value& v);

/// Total order: null < numbers (numeric order) < strings (byte order).
int compare(const Value& a, const Value& b);
inline bool value_less(const Value& a, const Value& b) { return compare(a, b) < 0; }

std::string format_double(double d);

enum class Kind { quantitative, temporal, ordinal, nominal, boolean, identifier };

std::string_view to_string(Kind k);
Kind kind_from_string(std::string_view s);
/// Discrete kinds are usable as grouping dimensions.
inline bool is_discrete(Kind k) { return k == Kind::nominal || k == Kind::ordinal || k == Kind::boolean; }

struct RawColumn {
    std::string name;
    std::vector<std::optional<std::string>> cells;
};

struct RawTable {
    std::vector<RawColumn> columns;
    std::size_t row_count = 0;
    std::string source_uri;
};

struct TypedColumn {
    std::string name;
    Kind kind = Kind::nominal;
    std::vector<Value> values;
};

struct Table {
    std::vector<TypedColumn> columns;
    std::size_t row_count = 0;

    const TypedColumn* find(std::string_view name) const;
};

}  // namespace reportsmith
