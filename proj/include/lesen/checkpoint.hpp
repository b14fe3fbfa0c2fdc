#pragma once

#include <string>

#include "lesen/mean_teacher.hpp"
#include "lesen/network.hpp"

namespace lesen {

// Single-file binary checkpoint: magic "VPCK", format version, NetworkConfig,
// then "student" and "teacher" sections (each parameter as name length, name,
// dtype code, rank, dims, row-major little-endian float32), optimizer moments
// and step count, and the epoch counter.
void save_checkpoint(const std::string& path, const NetworkConfig& config,
                     const TrainState& state);

struct LoadedCheckpoint {
    NetworkConfig config;
    TrainState state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lesen
