#pragma once

#include <filesystem>
#include <string>

namespace rolekit::util {

/// Writes to a sibling temporary file, then renames it over `path`.
/// Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace rolekit::util
