#pragma once

#include <filesystem>
#include <vector>

#include "eeo/model.hpp"
#include "eeo/serial.hpp"

namespace eeo {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kArtifactModel = 1;
inline constexpr std::uint32_t kArtifactClassifier = 2;

/// Layer-table entry helpers shared by model and classifier checkpoints.
/// A layer record is the spec followed by its parameter tensors.
void write_layer(BinaryWriter& w, const Layer& layer);
void read_layer_into(BinaryReader& r, Sequential& net);

std::vector<std::uint8_t> serialize_model(const EarlyExitModel& model);
EarlyExitModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const EarlyExitModel& model, const std::filesystem::path& path);
EarlyExitModel load_model(const std::filesystem::path& path);

/// Serialized backbone only (specs + weights); the fine-tuning freeze
/// invariant compares these bytes before and after.
std::vector<std::uint8_t> serialize_backbone(const EarlyExitModel& model);

} // namespace eeo
