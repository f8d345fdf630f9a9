#pragma once

#include <filesystem>
#include <memory>

#include "dctnet/model/network.hpp"

namespace dctnet::model {

/// Writes one <name>.tensor file per parameter and batch-norm buffer plus a
/// manifest.json holding the config, the step count and the tensor names.
void save_checkpoint(const std::filesystem::path& dir, DctNet& model, int step);

struct LoadedCheckpoint {
    std::unique_ptr<DctNet> model;
    int step = 0;
};

/// Rebuilds the model from the manifest's config and restores every tensor.
/// Throws DataError when a tensor is missing or has the wrong shape.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace dctnet::model
