#pragma once

#include <filesystem>
#include <string>

#include "c3/model.hpp"

namespace c3 {

/// JSON container: format tag, version, layer dims and one flat row-major
/// array per parameter block. Doubles are written in shortest round-trip form.
std::string checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const std::string& text);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace c3
