#include "reportsmith/value.hpp"

#include <charconv>
#include <cmath>

#include "reportsmith/error.hpp"

namespace reportsmith {

std::optional<double> as_double(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

std::string format_double(double d) {
    if (std::isnan(d)) return "NaN";
    if (std::isinf(d)) return d > 0 ? "Infinity" : "-Infinity";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

std::string to_text(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) return "";
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
            else if constexpr (std::is_same_v<T, double>) return format_double(x);
            else return x;
        },
        v);
}

int compare(const Value& a, const Value& b) {
    auto rank = [](const Value& v) { return is_null(v) ? 0 : is_numeric(v) ? 1 : 2; };
    const int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (ra == 0) return 0;
    if (ra == 1) {
        if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
            auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
            return x < y ? -1 : (x > y ? 1 : 0);
        }
        double x = *as_double(a), y = *as_double(b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    return std::get<std::string>(a).compare(std::get<std::string>(b)) < 0
               ? -1
               : (std::get<std::string>(a) == std::get<std::string>(b) ? 0 : 1);
}

std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::quantitative: return "quantitative";
        case Kind::temporal: return "temporal";
        case Kind::ordinal: return "ordinal";
        case Kind::nominal: return "nominal";
        case Kind::boolean: return "boolean";
        case Kind::identifier: return "identifier";
    }
    return "nominal";
}

Kind kind_from_string(std::string_view s) {
    for (Kind k : {Kind::quantitative, Kind::temporal, Kind::ordinal, Kind::nominal, Kind::boolean,
                   Kind::identifier})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::ParseError, "unknown field kind '" + std::string(s) + "'");
}

const TypedColumn* Table::find(std::string_view name) const {
    for (const auto& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace reportsmith
