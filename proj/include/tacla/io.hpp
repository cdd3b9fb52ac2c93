#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace tacla {

/// Throws IoFailure.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file. Creates parent directories. Throws IoFailure.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Parses JSON, mapping syntax errors to SchemaViolation and IO to IoFailure.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Two-space indented, trailing newline. Stable for identical values.
std::string dump_json(const nlohmann::json& j);

}  // namespace tacla
