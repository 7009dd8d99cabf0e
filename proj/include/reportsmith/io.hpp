#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace reportsmith {

std::string read_file(const std::filesystem::path& p);
/// Writes via a sibling temp file and rename so readers never see partial content.
void write_file_atomic(const std::filesystem::path& p, std::string_view bytes);

}  // namespace reportsmith
