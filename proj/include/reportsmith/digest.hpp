#pragma once

#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace reportsmith {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view bytes);

/// Key-sorted, whitespace-free serialization used wherever a digest is taken
/// over structured data.
std::string canonical_dump(const nlohmann::json& j);
inline std::string json_digest(const nlohmann::json& j) { return sha256_hex(canonical_dump(j)); }

}  // namespace reportsmith
