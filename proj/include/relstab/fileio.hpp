#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace relstab {

// Whole-file read; throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to "<path>.partial" and renames over path once the bytes are on
// disk, so a failed run never leaves a half-written result under the final
// name. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace relstab
