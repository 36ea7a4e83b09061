#pragma once

#include <filesystem>

#include <json.hpp>

#include "doelens/nnet.hpp"

namespace doelens {

inline constexpr std::uint32_t checkpoint_version = 1;

/// Binary checkpoint: magic "DOELCKPT", u32 version, length-prefixed JSON
/// header (architecture plus caller metadata), then every weight and buffer
/// tensor as name, rank, shape and little-endian float32 values.
void save_checkpoint(const nnet::ModelParams& params, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct Checkpoint {
  nnet::ModelParams params;
  nlohmann::json metadata;
};

/// Throws std::invalid_argument for a missing file and std::runtime_error for
/// a corrupt or incompatible one.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace doelens
