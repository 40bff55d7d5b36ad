#pragma once

#include <memory>
#include <optional>
#include <string>

#include "eeo/distortion_classifier.hpp"
#include "eeo/model.hpp"
#include "eeo/netem.hpp"
#include "eeo/wire.hpp"

namespace eeo {

/// Per-inference latency ledger. total_ms is the sum of the parts by
/// construction; offload-only parts stay 0 for on-device inferences.
struct LatencyBreakdown {
    double classifier_ms = 0.0;
    double edge_compute_ms = 0.0;
    double serialize_ms = 0.0;
    double emulated_network_ms = 0.0;
    double cloud_compute_ms = 0.0;
    double total_ms = 0.0;
};

/// Cloud half: decodes offload requests, runs the backbone tail plus the
/// final expert branch, resolves the fallback rule. Stateless per request;
/// safe for concurrent use once constructed.
class CloudService {
public:
    CloudService(EarlyExitModel model, std::string model_id, ComputeCostModel cost = {},
                 bool virtual_compute = true);

    OffloadResponse handle(const OffloadRequest& req) const;
    /// decode -> handle -> encode; failures come back as error frames.
    std::vector<std::uint8_t> handle_frame(std::span<const std::uint8_t> frame) const;

    const std::string& model_id() const { return model_id_; }
    const EarlyExitModel& model() const { return model_; }

private:
    EarlyExitModel model_;
    std::string model_id_;
    ComputeCostModel cost_;
    bool virtual_compute_;
};

/// Byte-stream request/response channel to the cloud. Implementations count
/// calls so tests can assert on-device inferences never touch the transport.
class Transport {
public:
    virtual ~Transport() = default;

    std::vector<std::uint8_t> roundtrip(std::span<const std::uint8_t> frame) {
        ++calls_;
        return do_roundtrip(frame);
    }
    long calls() const { return calls_; }

private:
    virtual std::vector<std::uint8_t> do_roundtrip(std::span<const std::uint8_t> frame) = 0;
    long calls_ = 0;
};

/// In-process transport: frames still pass through the full codec.
class LoopbackTransport final : public Transport {
public:
    explicit LoopbackTransport(const CloudService* cloud) : cloud_(cloud) {}

private:
    std::vector<std::uint8_t> do_roundtrip(std::span<const std::uint8_t> frame) override {
        return cloud_->handle_frame(frame);
    }
    const CloudService* cloud_;
};

struct EdgeConfig {
    std::string model_id;
    float p_tar = 0.8f;
    bool use_classifier = true;  // false: pristine baseline, no classifier cost
    NetworkProfile profile;
    RttJitter jitter{};
    ComputeCostModel cost{};
};

/// Edge half: distortion classification, early-exit inference and the
/// offload round trip, with the latency counter semantics of the experiment
/// protocol (the counter starts after distortion, and includes the
/// classifier only in expert mode). One instance per experiment stream.
class EdgeService {
public:
    EdgeService(EarlyExitModel model, std::optional<DistortionClassifier> classifier,
                EdgeConfig config, Transport* transport, Clock* clock);

    struct Outcome {
        InferenceResult result;
        LatencyBreakdown latency;
        DistortionKind kind_used = DistortionKind::Pristine;
    };

    /// Expert mode: classifier selects the branches. Baseline mode: pristine.
    Outcome handle(const ImageU8& image);
    /// Forced expert kind (the "run each DNN independently" protocol).
    Outcome handle_with_kind(const ImageU8& image, DistortionKind kind);

    const EdgeConfig& config() const { return config_; }

private:
    Outcome run(const ImageU8& image, DistortionKind kind, double classifier_ms);

    EarlyExitModel model_;
    std::optional<DistortionClassifier> classifier_;
    EdgeConfig config_;
    Transport* transport_;
    Clock* clock_;
    TransferEmulator emulator_;
};

} // namespace eeo
