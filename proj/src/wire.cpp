#include "eeo/wire.hpp"

#include "eeo/errors.hpp"
#include "eeo/serial.hpp"

namespace eeo {

namespace {

constexpr std::uint32_t kFinalSlotWire = 0xFFFFFFFFu;

void write_branch_record(BinaryWriter& w, const BranchRecord& rec) {
    w.u32(rec.exit_slot == kFinalSlot ? kFinalSlotWire : static_cast<std::uint32_t>(rec.exit_slot));
    w.u32(static_cast<std::uint32_t>(rec.predicted_class));
    w.f32(rec.confidence);
}

BranchRecord read_branch_record(BinaryReader& r) {
    BranchRecord rec;
    const std::uint32_t slot = r.u32();
    rec.exit_slot = slot == kFinalSlotWire ? kFinalSlot : static_cast<int>(slot);
    rec.predicted_class = static_cast<int>(r.u32());
    rec.confidence = r.f32();
    if (!(rec.confidence >= 0.0f && rec.confidence <= 1.0f)) {
        throw FormatError(FormatError::Code::Malformed, "branch confidence outside [0,1]");
    }
    return rec;
}

// Outer framing shared by all message types.
BinaryWriter begin_frame(WireMessage type) {
    BinaryWriter w;
    w.u32(0);  // frame length, patched by finish_frame
    w.magic("EOFF");
    w.u32(kWireVersion);
    w.u8(static_cast<std::uint8_t>(type));
    return w;
}

std::vector<std::uint8_t> finish_frame(BinaryWriter& w) {
    std::vector<std::uint8_t> bytes = w.take();
    const std::uint32_t len = static_cast<std::uint32_t>(bytes.size() - 4);
    for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (8 * i));
    return bytes;
}

BinaryReader open_frame(std::span<const std::uint8_t> frame, WireMessage expected) {
    BinaryReader r(frame);
    const std::uint32_t len = r.u32();
    if (static_cast<std::size_t>(len) + 4 != frame.size()) {
        throw FormatError(FormatError::Code::Truncated,
                          "frame length field says " + std::to_string(len) + " bytes, buffer has " +
                          std::to_string(frame.size() - 4));
    }
    r.expect_magic("EOFF");
    const std::uint32_t version = r.u32();
    if (version != kWireVersion) {
        throw FormatError(FormatError::Code::VersionMismatch,
                          "wire version " + std::to_string(version) + ", this build speaks " +
                          std::to_string(kWireVersion));
    }
    const std::uint8_t type = r.u8();
    if (type != static_cast<std::uint8_t>(expected)) {
        throw FormatError(FormatError::Code::Malformed,
                          "unexpected message type " + std::to_string(type));
    }
    return r;
}

void write_result(BinaryWriter& w, const InferenceResult& res) {
    w.u32(static_cast<std::uint32_t>(res.predicted_class));
    w.f32(res.confidence);
    w.u32(static_cast<std::uint32_t>(res.exit_taken));
    w.u32(res.exit_slot == kFinalSlot ? kFinalSlotWire : static_cast<std::uint32_t>(res.exit_slot));
    w.u8(res.offloaded ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(res.per_branch.size()));
    for (const BranchRecord& rec : res.per_branch) write_branch_record(w, rec);
}

InferenceResult read_result(BinaryReader& r) {
    InferenceResult res;
    res.predicted_class = static_cast<int>(r.u32());
    res.confidence = r.f32();
    const std::uint32_t taken = r.u32();
    if (taken > static_cast<std::uint32_t>(ExitTaken::Fallback)) {
        throw FormatError(FormatError::Code::Malformed, "unknown exit_taken value");
    }
    res.exit_taken = static_cast<ExitTaken>(taken);
    const std::uint32_t slot = r.u32();
    res.exit_slot = slot == kFinalSlotWire ? kFinalSlot : static_cast<int>(slot);
    res.offloaded = r.u8() != 0;
    const std::uint32_t n = r.u32();
    if (n > 1024) throw FormatError(FormatError::Code::Malformed, "implausible per_branch count");
    for (std::uint32_t i = 0; i < n; ++i) res.per_branch.push_back(read_branch_record(r));
    return res;
}

} // namespace

std::vector<std::uint8_t> encode_request(const OffloadRequest& req) {
    BinaryWriter w = begin_frame(WireMessage::Request);
    w.str(req.model_id);
    w.u32(static_cast<std::uint32_t>(req.kind));
    w.u32(static_cast<std::uint32_t>(req.partition_point));
    w.f32(req.p_tar);
    w.u32(static_cast<std::uint32_t>(req.per_branch.size()));
    for (const BranchRecord& rec : req.per_branch) write_branch_record(w, rec);
    w.tensor(req.payload);
    return finish_frame(w);
}

OffloadRequest decode_request(std::span<const std::uint8_t> frame) {
    BinaryReader r = open_frame(frame, WireMessage::Request);
    OffloadRequest req;
    req.protocol_version = kWireVersion;
    req.model_id = r.str();
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(DistortionKind::Noise)) {
        throw FormatError(FormatError::Code::Malformed, "unknown distortion kind on the wire");
    }
    req.kind = static_cast<DistortionKind>(kind);
    req.partition_point = static_cast<int>(r.u32());
    req.p_tar = r.f32();
    if (!(req.p_tar >= 0.0f && req.p_tar <= 1.0f)) {
        throw FormatError(FormatError::Code::Malformed, "p_tar outside [0,1]");
    }
    const std::uint32_t n = r.u32();
    if (n > 1024) throw FormatError(FormatError::Code::Malformed, "implausible per_branch count");
    for (std::uint32_t i = 0; i < n; ++i) req.per_branch.push_back(read_branch_record(r));
    req.payload = r.tensor();
    r.expect_end();
    return req;
}

std::vector<std::uint8_t> encode_response(const OffloadResponse& resp) {
    BinaryWriter w = begin_frame(WireMessage::Response);
    write_result(w, resp.result);
    w.f64(resp.cloud_compute_ms);
    return finish_frame(w);
}

OffloadResponse decode_response(std::span<const std::uint8_t> frame) {
    BinaryReader r = open_frame(frame, WireMessage::Response);
    OffloadResponse resp;
    resp.result = read_result(r);
    resp.cloud_compute_ms = r.f64();
    r.expect_end();
    return resp;
}

std::vector<std::uint8_t> encode_error(std::uint32_t code, const std::string& message) {
    BinaryWriter w = begin_frame(WireMessage::Error);
    w.u32(code);
    w.str(message);
    return finish_frame(w);
}

WireMessage peek_message_type(std::span<const std::uint8_t> frame) {
    BinaryReader r(frame);
    const std::uint32_t len = r.u32();
    if (static_cast<std::size_t>(len) + 4 != frame.size()) {
        throw FormatError(FormatError::Code::Truncated, "frame length mismatch");
    }
    r.expect_magic("EOFF");
    const std::uint32_t version = r.u32();
    if (version != kWireVersion) {
        throw FormatError(FormatError::Code::VersionMismatch,
                          "wire version " + std::to_string(version));
    }
    const std::uint8_t type = r.u8();
    if (type < 1 || type > 3) {
        throw FormatError(FormatError::Code::Malformed, "unknown message type");
    }
    return static_cast<WireMessage>(type);
}

OffloadResponse decode_response_or_throw(std::span<const std::uint8_t> frame) {
    if (peek_message_type(frame) == WireMessage::Error) {
        BinaryReader r = open_frame(frame, WireMessage::Error);
        const std::uint32_t code = r.u32();
        const std::string message = r.str();
        throw TransportError("cloud error " + std::to_string(code) + ": " + message);
    }
    return decode_response(frame);
}

} // namespace eeo
