#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eeo/distortion.hpp"
#include "eeo/layers.hpp"
#include "eeo/rng.hpp"
#include "eeo/tensor.hpp"

namespace eeo {

/// Branch slots: 1..E are side exits in backbone order; the cloud-side exit
/// at the end of the backbone uses kFinalSlot (it sorts after every side exit,
/// which is what the fallback tie-break wants).
inline constexpr int kFinalSlot = std::numeric_limits<int>::max();
std::string exit_slot_name(int slot);

struct ExitPoint {
    int index = 0;              // 1..E
    int backbone_position = 0;  // number of backbone layers before the tap
};

/// One expert head: GlobalAvgPool -> Dense(K), plus its fitted temperature.
struct Branch {
    Sequential head;
    float temperature = 1.0f;
    DistortionKind expert_kind = DistortionKind::Pristine;
};

struct BranchRecord {
    int exit_slot = 0;
    int predicted_class = -1;
    float confidence = 0.0f;

    bool operator==(const BranchRecord&) const = default;
};

enum class ExitTaken : std::uint32_t { Side = 0, Final = 1, Fallback = 2 };
std::string exit_taken_name(ExitTaken t);

struct InferenceResult {
    int predicted_class = -1;
    float confidence = 0.0f;
    ExitTaken exit_taken = ExitTaken::Side;
    int exit_slot = 0;  // slot whose record won (side index or kFinalSlot)
    std::vector<BranchRecord> per_branch;
    bool offloaded = false;

    bool operator==(const InferenceResult&) const = default;
};

/// What the edge produced: either a local result or the offload payload.
struct EdgeOutcome {
    bool exited = false;
    InferenceResult result;         // valid when exited
    Tensor partition_activations;   // valid when !exited
    std::vector<BranchRecord> per_branch;
    long layers_executed = 0;       // backbone layers only
    std::size_t macs_executed = 0;  // backbone + evaluated branch heads
};

/// Shared backbone + per-(exit, distortion-kind) expert branches with a fixed
/// partition at the last side exit. Immutable after finalize(); concurrent
/// read-only inference is safe from then on.
class EarlyExitModel {
public:
    using BranchKey = std::pair<int, DistortionKind>;

    EarlyExitModel() = default;

    /// Builds backbone + pristine branches. Side exits tap after the layers
    /// closest to 25/50/75% of cumulative MAC cost; partition point is the
    /// last side tap.
    static EarlyExitModel build(const std::vector<LayerSpec>& backbone_specs, Shape input_chw,
                                int class_count, int exit_count, std::uint64_t init_seed);

    const Shape& input_shape() const { return input_shape_; }
    int class_count() const { return class_count_; }
    int exit_count() const { return static_cast<int>(exit_points_.size()); }
    const std::vector<ExitPoint>& exit_points() const { return exit_points_; }
    int partition_point() const { return partition_point_; }

    Sequential& backbone() { return backbone_; }
    const Sequential& backbone() const { return backbone_; }

    /// All slots in evaluation order: side exits then kFinalSlot.
    std::vector<int> slots() const;
    Shape tap_shape(int slot) const;  // [C,H,W] activation shape at the slot

    bool has_branch(int slot, DistortionKind kind) const;
    Branch& branch(int slot, DistortionKind kind);
    const Branch& branch(int slot, DistortionKind kind) const;
    const std::map<BranchKey, Branch>& branches() const { return branches_; }
    std::vector<DistortionKind> expert_kinds() const;

    /// Clones the pristine branches as the initialization of a new expert set.
    void add_expert_set(DistortionKind kind);

    void finalize() { finalized_ = true; }
    bool finalized() const { return finalized_; }

    std::size_t backbone_macs_before(int position) const;  // layers [0, position)
    std::size_t branch_macs(int slot) const;

private:
    void rebuild_cost_tables();
    friend EarlyExitModel load_model_from_reader(class BinaryReader& r);

    Sequential backbone_;
    std::vector<ExitPoint> exit_points_;
    std::map<BranchKey, Branch> branches_;
    int partition_point_ = 0;
    int class_count_ = 0;
    Shape input_shape_;
    std::vector<std::size_t> macs_prefix_;        // macs_prefix_[p] = MACs of layers [0,p)
    std::map<int, std::size_t> branch_mac_table_;
    bool finalized_ = false;
};

/// The stock 48x48 backbone: four Conv/ReLU blocks with roughly equal MAC
/// cost per block, so the exit-placement rule lands one side exit at each of
/// the first three block ends.
std::vector<LayerSpec> default_backbone_specs(int in_channels = 3);
inline Shape default_input_shape(int in_channels = 3) { return {in_channels, 48, 48}; }

/// Model input convention: images are per-image standardized (zero mean,
/// unit variance over all pixels and channels). Keeps activation scale
/// bounded whatever the capture conditions did to the pixel statistics.
Tensor preprocess_image(const ImageU8& img);
Tensor preprocess_batch(const std::vector<ImageU8>& images);

/// Logits of one expert branch on tap activations ([1,C,H,W] -> [K]).
Tensor branch_logits(const EarlyExitModel& model, int slot, DistortionKind kind,
                     const Tensor& activations);

/// (argmax, max) of softmax(z / temperature); temperature must be > 0.
std::pair<int, float> calibrated_confidence(const Tensor& z, float temperature);

/// Exit iff conf >= p_tar.
bool decide_exit(float conf, float p_tar);

/// Runs the backbone through the side exits with the selected expert kind;
/// stops at the first confident branch, otherwise returns the partition
/// activations and the per-branch records for offload.
EdgeOutcome edge_forward(const EarlyExitModel& model, DistortionKind kind, const Tensor& input,
                         float p_tar);

/// Cloud half: remaining layers + final expert branch; falls back to the most
/// confident record (ties -> lowest exit) when the final one is unconfident.
InferenceResult cloud_forward(const EarlyExitModel& model, DistortionKind kind,
                              const Tensor& partition_activations,
                              const std::vector<BranchRecord>& per_branch, float p_tar,
                              std::size_t* macs_executed = nullptr);

/// Single-process reference path: edge_forward + (if needed) cloud_forward.
InferenceResult full_forward(const EarlyExitModel& model, DistortionKind kind, const Tensor& input,
                             float p_tar);

/// Mean negative log-likelihood of softmax(z / T) at the labels.
double nll_at_temperature(const Tensor& logits, std::span<const int> labels, double temperature);

/// argmin over T in [0.05, 20] of the validation NLL, golden-section to
/// |dT| < 1e-3; never worse than T = 1.
float fit_temperature(const Tensor& logits, std::span<const int> labels);

} // namespace eeo
