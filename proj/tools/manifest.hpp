#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace homophily::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Hashes of a file, or of every regular file under a directory.
nlohmann::json hash_inputs(const std::vector<std::filesystem::path>& paths);

/// Writes `out/manifest.json`: config and its hash, input and output hashes,
/// seeds and tool versions.
void write_manifest(const std::filesystem::path& out, const nlohmann::json& config,
                    const std::vector<std::filesystem::path>& inputs, const nlohmann::json& seeds);

}  // namespace homophily::cli
