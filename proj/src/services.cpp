#include "eeo/services.hpp"

#include <chrono>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

double wall_now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

CloudService::CloudService(EarlyExitModel model, std::string model_id, ComputeCostModel cost,
                           bool virtual_compute)
    : model_(std::move(model)), model_id_(std::move(model_id)), cost_(cost),
      virtual_compute_(virtual_compute) {
    model_.finalize();
}

OffloadResponse CloudService::handle(const OffloadRequest& req) const {
    if (req.model_id != model_id_) {
        throw ValueError("model_id mismatch: request carries '" + req.model_id +
                         "', cloud serves '" + model_id_ + "'");
    }
    if (req.partition_point != model_.partition_point()) {
        throw ValueError("partition point mismatch: request " + std::to_string(req.partition_point) +
                         ", model " + std::to_string(model_.partition_point()));
    }

    OffloadResponse resp;
    std::size_t macs = 0;
    const double t0 = wall_now_ms();
    resp.result = cloud_forward(model_, req.kind, req.payload, req.per_branch, req.p_tar, &macs);
    resp.cloud_compute_ms = virtual_compute_? cost_.cloud_ms(macs) : wall_now_ms() - t0;
    return resp;
}

std::vector<std::uint8_t> CloudService::handle_frame(std::span<const std::uint8_t> frame) const {
    OffloadRequest req;
    try {
        req = decode_request(frame);
    } catch (const FormatError& e) {
        return encode_error(1, e.what());
    }
    try {
        return encode_response(handle(req));
    } catch (const Error& e) {
        return encode_error(2, e.what());
    }
}

EdgeService::EdgeService(EarlyExitModel model, std::optional<DistortionClassifier> classifier,
                         EdgeConfig config, Transport* transport, Clock* clock)
    : model_(std::move(model)), classifier_(std::move(classifier)), config_(std::move(config)),
      transport_(transport), clock_(clock), emulator_(config_.profile, config_.jitter) {
    if (config_.use_classifier && !classifier_.has_value()) {
        throw ConfigError("expert mode needs a distortion classifier");
    }
    model_.finalize();
}

EdgeService::Outcome EdgeService::handle(const ImageU8& image) {
    if (!config_.use_classifier) {
        // Baseline: no classifier runs and no classifier cost is charged.
        return run(image, DistortionKind::Pristine, 0.0);
    }
    double classifier_ms;
    DistortionKind kind;
    if (clock_->is_virtual()) {
        kind = classifier_->classify(image);
        classifier_ms = config_.cost.edge_ms(classifier_->mac_count());
    } else {
        const double t0 = wall_now_ms();
        kind = classifier_->classify(image);
        classifier_ms = wall_now_ms() - t0;
    }
    return run(image, kind, classifier_ms);
}

EdgeService::Outcome EdgeService::handle_with_kind(const ImageU8& image, DistortionKind kind) {
    return run(image, kind, 0.0);
}

EdgeService::Outcome EdgeService::run(const ImageU8& image, DistortionKind kind,
                                      double classifier_ms) {
    Outcome out;
    out.kind_used = kind;
    out.latency.classifier_ms = classifier_ms;
    clock_->advance(classifier_ms);

    EdgeOutcome edge;
    if (clock_->is_virtual()) {
        edge = edge_forward(model_, kind, preprocess_image(image), config_.p_tar);
        out.latency.edge_compute_ms = config_.cost.edge_ms(edge.macs_executed);
    } else {
        const double t0 = wall_now_ms();
        edge = edge_forward(model_, kind, preprocess_image(image), config_.p_tar);
        out.latency.edge_compute_ms = wall_now_ms() - t0;
    }
    clock_->advance(out.latency.edge_compute_ms);

    if (edge.exited) {
        out.result = edge.result;
        out.latency.total_ms = out.latency.classifier_ms + out.latency.edge_compute_ms;
        return out;
    }

    OffloadRequest req;
    req.model_id = config_.model_id;
    req.kind = kind;
    req.partition_point = model_.partition_point();
    req.payload = edge.partition_activations;
    req.per_branch = edge.per_branch;
    req.p_tar = config_.p_tar;

    std::vector<std::uint8_t> frame, reply;
    OffloadResponse resp;
    try {
        if (clock_->is_virtual()) {
            frame = encode_request(req);
            out.latency.emulated_network_ms = emulator_.delay_ms(frame.size());
            reply = transport_->roundtrip(frame);
            resp = decode_response_or_throw(reply);
            out.latency.serialize_ms = config_.cost.serialize_ms(frame.size() + reply.size());
        } else {
            const double t0 = wall_now_ms();
            frame = encode_request(req);
            out.latency.emulated_network_ms = emulator_.delay_ms(frame.size());
            clock_->advance(out.latency.emulated_network_ms);  // sleeps in wall mode
            reply = transport_->roundtrip(frame);
            resp = decode_response_or_throw(reply);
            // Encode/decode plus the local hop, minus the modeled parts.
            out.latency.serialize_ms = std::max(
                0.0, wall_now_ms() - t0 - out.latency.emulated_network_ms - resp.cloud_compute_ms);
        }
    } catch (const TransportError& e) {
        // Surface the partial breakdown with the failure.
        throw TransportError(std::string(e.what()) + " (partial latency: classifier " +
                             std::to_string(out.latency.classifier_ms) + " ms, edge compute " +
                             std::to_string(out.latency.edge_compute_ms) + " ms, emulated network " +
                             std::to_string(out.latency.emulated_network_ms) + " ms)");
    }
    out.latency.cloud_compute_ms = resp.cloud_compute_ms;
    if (clock_->is_virtual()) {
        clock_->advance(out.latency.serialize_ms + out.latency.emulated_network_ms +
                        out.latency.cloud_compute_ms);
    }

    out.result = resp.result;
    out.latency.total_ms = out.latency.classifier_ms + out.latency.edge_compute_ms +
                           out.latency.serialize_ms + out.latency.emulated_network_ms +
                           out.latency.cloud_compute_ms;
    return out;
}

} // namespace eeo
