#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eeo/distortion.hpp"
#include "eeo/image.hpp"

namespace eeo {

enum class Split : std::uint32_t { Train = 0, Validation = 1, Test = 2 };
std::string split_name(Split split);

struct LabeledImage {
    ImageU8 image;
    int label = 0;
};

struct LabeledDataset {
    std::vector<LabeledImage> items;
    int class_count = 0;
    std::vector<std::string> class_names;
    Split split = Split::Train;
};

struct DatasetSplits {
    LabeledDataset train;
    LabeledDataset validation;
    LabeledDataset test;
};

/// Loads either a directory of class folders (PNG / binary PPM files) or the
/// built-in generator "shapes-v1" (optionally "shapes-v1:<per-class>").
/// Splits 80/10/10 by a seeded shuffle; class ids follow sorted folder names.
DatasetSplits load_dataset(const std::string& source, std::uint64_t seed);

/// Renders one synthetic sample (ellipse / triangle / bar on a gradient
/// background, jittered pose and striped texture). Deterministic in (seed, index).
ImageU8 render_shape_image(int class_id, std::uint64_t seed, std::uint64_t index, int size = 48);

int shapes_v1_class_count();
std::vector<std::string> shapes_v1_class_names(int class_count = 3);
int shapes_v1_max_class_count();

/// Cache file name "<split>_<kind>_<level>.bin" for distorted copies.
std::string distorted_cache_name(Split split, DistortionKind kind, float level);
void save_dataset_cache(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_dataset_cache(const std::filesystem::path& path);

/// Same images with the distortion applied to every item (level fixed);
/// noise seeds derive from `seed` and the item index.
LabeledDataset distort_dataset(const LabeledDataset& dataset, DistortionKind kind, float level,
                               std::uint64_t seed);

/// Distorts every item at a uniformly drawn grid level (the fine-tuning
/// validation regime). Pristine kind returns the input unchanged.
LabeledDataset distort_dataset_uniform_levels(const LabeledDataset& dataset, DistortionKind kind,
                                              std::uint64_t seed);

} // namespace eeo
