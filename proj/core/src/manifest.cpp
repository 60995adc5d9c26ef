#include "f2r/manifest.hpp"

#include <fstream>

#include "f2r/common.hpp"

namespace f2r {

nlohmann::json make_manifest(const std::string& command, const std::string& config_hash,
                             std::uint64_t seed, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs) {
  return {{"command", command},
          {"config_hash", config_hash},
          {"seed", seed},
          {"version", kProjectVersion},
          {"inputs", inputs},
          {"outputs", outputs}};
}

void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("manifest: cannot open '" + path + "' for writing");
  os << manifest.dump(2) << "\n";
}

std::string manifest_path_for(const std::string& output_path, bool is_directory) {
  if (is_directory) return output_path + "/manifest.json";
  return output_path + ".manifest.json";
}

}  // namespace f2r
