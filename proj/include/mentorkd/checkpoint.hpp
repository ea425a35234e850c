#pragma once

#include <filesystem>
#include <optional>

#include "mentorkd/model.hpp"
#include "mentorkd/train.hpp"

namespace mentorkd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: 8-byte magic, u32 version, u64 header length, JSON header (config,
// role, vocabulary, parameter shapes, train-state scalars), then raw float32
// parameter data followed by the optimizer moments when a state is stored.
void save_checkpoint(const TinyTransformer& model, const TrainState* state, const std::filesystem::path& path);

struct Checkpoint {
    TinyTransformer model;
    std::optional<TrainState> state;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mentorkd
