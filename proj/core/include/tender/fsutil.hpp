#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tender {

// Writes `<path>.tmp` then renames over `path`; the final name never holds
// partial content. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Throws FileUnreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace tender
