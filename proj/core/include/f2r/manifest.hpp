#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace f2r {

inline constexpr const char* kProjectVersion = "0.1.0";

/// Reproducibility record written beside every CLI output. Contains no
/// timestamps so identical (config, seed) runs produce identical bytes.
nlohmann::json make_manifest(const std::string& command, const std::string& config_hash,
                             std::uint64_t seed, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs);

void write_manifest(const std::string& path, const nlohmann::json& manifest);

/// DIR/manifest.json for directory outputs, <file>.manifest.json otherwise.
std::string manifest_path_for(const std::string& output_path, bool is_directory);

}  // namespace f2r
