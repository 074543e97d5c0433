#include "hpo/assets.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace hpo {

std::string asset_dir() {
  if (const char* env = std::getenv("HPO_ASSETS"); env != nullptr && *env != '\0') return env;
  return HPO_ASSET_DIR;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SearchSpace load_builtin_or_file_space(const std::string& name_or_path) {
  const auto builtin = std::filesystem::path(asset_dir()) / "spaces" / (name_or_path + ".json");
  if (name_or_path.find('/') == std::string::npos && std::filesystem::exists(builtin)) {
    return load_space(builtin.string());
  }
  return load_space(name_or_path);
}

}  // namespace hpo
