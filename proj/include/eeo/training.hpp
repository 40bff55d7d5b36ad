#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "eeo/dataset.hpp"
#include "eeo/model.hpp"

namespace eeo {

struct TrainHyper {
    float lr_head = 0.01f;
    float lr_backbone = 0.0015f;
    int batch_size = 32;
    float weight_decay = 0.0005f;
    int patience_epochs = 10;
    int max_epochs = 60;
    std::uint64_t seed = 1;
    float lr_min = 0.0f;  // cosine annealing floor

    void validate() const;  // positive rates, batch_size even and >= 2
};

/// Sum over exits of w_e * cross_entropy(logits_e, labels); weights default
/// to 1.0 (the BranchyNet-style joint objective).
double joint_loss(const std::vector<Tensor>& per_exit_logits, std::span<const int> labels,
                  std::span<const double> weights = {});

/// Logits of every exit (side exits in order, then final) for one batch.
std::vector<Tensor> per_exit_logits(const EarlyExitModel& model, DistortionKind kind,
                                    const Tensor& batch);

struct EvalStats {
    double loss = 0.0;
    std::vector<double> exit_accuracy;  // per slot, final last
};

/// Whole-dataset joint loss and per-exit accuracies (no exit gating).
EvalStats evaluate_joint(const EarlyExitModel& model, DistortionKind kind,
                         const LabeledDataset& dataset, int batch_size);

/// One line per (epoch, split): epoch, split, loss, accuracy per exit.
void log_epoch(std::ostream* log, int epoch, const char* split, const EvalStats& stats);

/// Joint multi-exit training on pristine images: Adam with separate head and
/// backbone learning rates, decoupled weight decay, per-epoch cosine
/// annealing, early stopping on validation joint loss with the best
/// checkpoint restored.
void train_pristine(EarlyExitModel& model, const DatasetSplits& data, const TrainHyper& hyper,
                    std::ostream* log = nullptr);

/// Adds (if absent) and trains the expert branches for one distortion kind:
/// backbone frozen, half of every mini-batch distorted at uniform grid
/// levels, validation on a fully distorted copy of the validation split.
void finetune_expert(EarlyExitModel& model, DistortionKind kind, const DatasetSplits& data,
                     const TrainHyper& hyper, std::ostream* log = nullptr);

/// Fits every branch temperature on the kind-matched validation set.
void calibrate_all(EarlyExitModel& model, const DatasetSplits& data, std::uint64_t seed);

} // namespace eeo
