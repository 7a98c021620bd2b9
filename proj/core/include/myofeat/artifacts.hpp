#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace myofeat::artifacts {

/// Library version, e.g. "0.3.0".
std::string_view version();

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& file);

/// `base/<command>-<YYYYmmdd-HHMMSS>`, with a numeric suffix if it exists.
/// The directory is created.
std::filesystem::path timestamped_dir(const std::filesystem::path& base, std::string_view command);

/// Writes config.json (the resolved configuration), seed.txt and
/// version.json into `dir`. version.json carries the only timestamp.
void write_run_record(const std::filesystem::path& dir, std::string_view command, const nlohmann::json& config,
                      std::uint64_t seed);

/// manifest.json listing every file below `dir` except itself and
/// version.json (sorted relative paths) with size and SHA-256.
nlohmann::json write_manifest(const std::filesystem::path& dir);

}  // namespace myofeat::artifacts
