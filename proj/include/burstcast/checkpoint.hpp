#pragma once

#include "burstcast/informer.hpp"
#include "burstcast/series.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace burstcast {

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

/// A trained model: its config, the normalization it was trained under, the
/// digest of the training config, and one f32 blob per parameter in model
/// order.
struct Checkpoint {
    ModelConfig model;
    NormStats norm;
    std::uint64_t train_digest = 0;
    std::vector<NamedTensor> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint make_checkpoint(const BurstInformer& model, const NormStats& norm, std::uint64_t train_digest);

/// Copies the blobs into a freshly built model. Throws DataError on a
/// missing, duplicated or misshapen tensor.
BurstInformer restore_model(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// With `expected`, refuses a checkpoint whose model config differs and lists
/// the differing fields.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig* expected = nullptr);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace burstcast
