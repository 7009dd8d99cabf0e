#pragma once

#include <optional>

#include <json.hpp>

#include "reportsmith/value.hpp"

namespace reportsmith {

nlohmann::ordered_json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
inline std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

/// Converts between the two nlohmann flavours (insertion-ordered vs sorted).
inline nlohmann::json to_plain(const nlohmann::ordered_json& j) { return nlohmann::json::parse(j.dump()); }
inline nlohmann::ordered_json to_ordered(const nlohmann::json& j) { return nlohmann::ordered_json::parse(j.dump()); }

}  // namespace reportsmith
