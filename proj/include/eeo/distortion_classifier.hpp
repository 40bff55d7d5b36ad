#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>

#include "eeo/dataset.hpp"
#include "eeo/layers.hpp"
#include "eeo/spectrum.hpp"

namespace eeo {

/// Small CNN over the 2-d log-spectrum that picks the prevalent distortion
/// kind, which in turn selects the expert branches the edge activates.
class DistortionClassifier {
public:
    DistortionClassifier() = default;
    DistortionClassifier(Sequential net, int spectrum_size);

    DistortionKind classify(const ImageU8& img) const;
    /// Logits over {pristine, blur, noise} for a precomputed [S,S] spectrum.
    Tensor logits_for(const Tensor& spectrum) const;

    int spectrum_size() const { return spectrum_size_; }
    Sequential& net() { return net_; }
    const Sequential& net() const { return net_; }
    std::size_t mac_count() const;

private:
    Sequential net_;
    int spectrum_size_ = 0;
};

struct ClassifierTrainConfig {
    int spectrum_size = 64;
    int batch_size = 32;
    float lr = 0.003f;
    float weight_decay = 0.0005f;
    int max_epochs = 25;
    int patience = 5;
    std::uint64_t seed = 1;
};

/// Trains on spectra of the train split: one pristine plus one blurred and
/// one noisy copy per image, levels uniform over the grids. Early-stops on
/// the equivalent validation-split construction.
DistortionClassifier train_distortion_classifier(const DatasetSplits& data,
                                                 const ClassifierTrainConfig& cfg,
                                                 std::ostream* log = nullptr);

/// counts[true][predicted] over {pristine, blur, noise}.
struct ConfusionMatrix {
    std::array<std::array<int, 3>, 3> counts{};

    double accuracy() const;
    double recall(DistortionKind kind) const;
    std::string to_csv() const;
};

/// Classifies a distorted copy of every image (fixed kind and level;
/// pristine ignores level).
ConfusionMatrix evaluate_distortion_classifier(const DistortionClassifier& classifier,
                                               const LabeledDataset& images, DistortionKind kind,
                                               float level, std::uint64_t seed);

void save_classifier(const DistortionClassifier& classifier, const std::filesystem::path& path);
DistortionClassifier load_classifier(const std::filesystem::path& path);

} // namespace eeo
