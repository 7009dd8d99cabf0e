#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reportsmith::csv {

/// RFC 4180 records. Quoted fields may contain separators, quotes ("") and line
/// breaks; CRLF and LF terminators are both accepted. Throws ParseError on an
/// unterminated quote.
std::vector<std::vector<std::string>> parse(std::string_view text);

std::string escape_field(std::string_view field);

}  // namespace reportsmith::csv
