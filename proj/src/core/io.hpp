#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace nlqx::io {

/// Whole file as bytes, or nullopt when it cannot be opened.
std::optional<std::string> read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`. Throws nlqx::Error.
void write_atomically(const std::filesystem::path& path, const std::string& data);

}  // namespace nlqx::io
