#pragma once

#include <filesystem>
#include <string>

#include "hpo/assets.hpp"

namespace test {

inline std::string fixture(const std::string& rel) { return std::string(HPO_TEST_FIXTURES) + "/" + rel; }
inline std::string golden(const std::string& name) { return hpo::read_text_file(fixture("golden/" + name)); }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hpo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
