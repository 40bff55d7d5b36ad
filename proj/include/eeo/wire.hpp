#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eeo/model.hpp"
#include "eeo/tensor.hpp"

namespace eeo {

inline constexpr std::uint32_t kWireVersion = 1;

/// Everything the edge ships with an offload: the partition activations plus
/// the side-branch records the cloud needs for the fallback rule.
struct OffloadRequest {
    std::uint32_t protocol_version = kWireVersion;
    std::string model_id;
    DistortionKind kind = DistortionKind::Pristine;
    int partition_point = 0;
    Tensor payload;
    std::vector<BranchRecord> per_branch;
    float p_tar = 0.0f;

    bool operator==(const OffloadRequest&) const = default;
};

struct OffloadResponse {
    InferenceResult result;
    double cloud_compute_ms = 0.0;

    bool operator==(const OffloadResponse&) const = default;
};

struct WireErrorBody {
    std::uint32_t code = 0;
    std::string message;
};

/// Length-prefixed frame: u32 length, magic "EOFF", u32 version, u8 message
/// type, then the body. decode(encode(x)) == x bit-exactly.
std::vector<std::uint8_t> encode_request(const OffloadRequest& req);
OffloadRequest decode_request(std::span<const std::uint8_t> frame);

std::vector<std::uint8_t> encode_response(const OffloadResponse& resp);
OffloadResponse decode_response(std::span<const std::uint8_t> frame);

std::vector<std::uint8_t> encode_error(std::uint32_t code, const std::string& message);

/// Returns the decoded message type (request/response/error) without parsing
/// the body. Throws on bad framing.
enum class WireMessage : std::uint8_t { Request = 1, Response = 2, Error = 3 };
WireMessage peek_message_type(std::span<const std::uint8_t> frame);

/// Decodes a response frame, surfacing error frames as TransportError.
OffloadResponse decode_response_or_throw(std::span<const std::uint8_t> frame);

} // namespace eeo
