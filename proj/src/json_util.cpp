#include "reportsmith/json_util.hpp"

namespace reportsmith {

nlohmann::ordered_json value_to_json(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    return nullptr;
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    if (j.is_boolean()) return static_cast<std::int64_t>(j.get<bool>());
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

}  // namespace reportsmith
