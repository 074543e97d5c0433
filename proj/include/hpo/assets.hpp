#pragma once

#include <string>

#include "hpo/space.hpp"

namespace hpo {

// Root of the bundled assets: $HPO_ASSETS if set, else the source-tree path
// baked in at configure time.
std::string asset_dir();

std::string read_text_file(const std::string& path);

// "svm", "lr", "rf", "nn", or a path to a space JSON file.
SearchSpace load_builtin_or_file_space(const std::string& name_or_path);

}  // namespace hpo
