#pragma once

#include <string>

#include "json.hpp"

#include "qtrain/trainer.hpp"

namespace qtrain {

/// Writes a versioned, self-describing checkpoint: config echo, every
/// trainable array with shape metadata, optimizer moments, and a whole-file
/// CRC-32. The write is atomic (temp file + rename).
void save_checkpoint(const TrainState& state, const nlohmann::json& config_echo,
                     const std::string& path);

struct LoadedCheckpoint {
    TrainState state;
    nlohmann::json config_echo;
};

/// Restores a checkpoint bit-exactly. Throws CheckpointError on version
/// mismatch, truncation, or checksum failure.
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace qtrain
