#pragma once

#include <string>

#include "colonnet/model.hpp"

namespace colonnet {

/// Serializes all three components, the architecture config, the seed, and
/// the completed-stage list into one file. Loading rebuilds the bundle and
/// restores bit-identical parameters.
void save_checkpoint(const std::string& path, const ModelBundle& model);

ModelBundle load_checkpoint(const std::string& path);

}  // namespace colonnet
