#pragma once

#include <cstdint>
#include <string>

#include "lrea/model.hpp"

namespace lrea {

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::uint64_t version = 0;  // content hash of config + tensors
};

// Content hash used as the parameter version; any change to the config or
// to any tensor byte changes it.
std::uint64_t params_version(const ModelParams& params, const ModelConfig& cfg);

// Single self-describing binary file: config block, then named tensors
// with shape headers, then the version hash.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& cfg);
Checkpoint load_checkpoint(const std::string& path);

std::string version_string(std::uint64_t version);

}  // namespace lrea
