#include "eeo/checkpoint.hpp"

#include "eeo/errors.hpp"

namespace eeo {

namespace {

void write_layer_spec(BinaryWriter& w, const LayerSpec& s) {
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u32(static_cast<std::uint32_t>(s.kernel));
    w.u32(static_cast<std::uint32_t>(s.stride));
    w.u32(static_cast<std::uint32_t>(s.padding));
    w.u32(static_cast<std::uint32_t>(s.in_features));
    w.u32(static_cast<std::uint32_t>(s.out_features));
    w.u32(static_cast<std::uint32_t>(s.pool));
}

LayerSpec read_layer_spec(BinaryReader& r) {
    LayerSpec s;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::Flatten)) {
        throw FormatError(FormatError::Code::Malformed, "unknown layer kind " + std::to_string(kind));
    }
    s.kind = static_cast<LayerKind>(kind);
    s.in_channels = static_cast<int>(r.u32());
    s.out_channels = static_cast<int>(r.u32());
    s.kernel = static_cast<int>(r.u32());
    s.stride = static_cast<int>(r.u32());
    s.padding = static_cast<int>(r.u32());
    s.in_features = static_cast<int>(r.u32());
    s.out_features = static_cast<int>(r.u32());
    s.pool = static_cast<int>(r.u32());
    return s;
}

void write_sequential(BinaryWriter& w, const Sequential& net) {
    w.u32(static_cast<std::uint32_t>(net.size()));
    for (int i = 0; i < net.size(); ++i) write_layer(w, net.layer(i));
}

Sequential read_sequential(BinaryReader& r) {
    Sequential net;
    const std::uint32_t count = r.u32();
    if (count > 4096) {
        throw FormatError(FormatError::Code::Malformed, "implausible layer count " + std::to_string(count));
    }
    for (std::uint32_t i = 0; i < count; ++i) read_layer_into(r, net);
    return net;
}

constexpr std::uint32_t kFinalSlotWire = 0xFFFFFFFFu;

} // namespace

void write_layer(BinaryWriter& w, const Layer& layer) {
    write_layer_spec(w, layer.spec());
    for (const Parameter& p : layer.params()) w.tensor(p.value);
}

void read_layer_into(BinaryReader& r, Sequential& net) {
    const LayerSpec spec = read_layer_spec(r);
    net.add(spec);
    Layer& layer = net.layer(net.size() - 1);
    for (Parameter& p : layer.params()) {
        Tensor value = r.tensor();
        if (value.shape() != p.value.shape()) {
            throw FormatError(FormatError::Code::LengthMismatch,
                              "parameter shape " + shape_str(value.shape()) +
                              " does not match layer geometry " + shape_str(p.value.shape()));
        }
        p.value = std::move(value);
    }
}

std::vector<std::uint8_t> serialize_model(const EarlyExitModel& model) {
    BinaryWriter w;
    w.magic("EEXP");
    w.u32(kCheckpointVersion);
    w.u32(kArtifactModel);

    w.u32(static_cast<std::uint32_t>(model.class_count()));
    w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
    for (int d : model.input_shape()) w.u32(static_cast<std::uint32_t>(d));

    write_sequential(w, model.backbone());

    w.u32(static_cast<std::uint32_t>(model.exit_points().size()));
    for (const ExitPoint& e : model.exit_points()) {
        w.u32(static_cast<std::uint32_t>(e.index));
        w.u32(static_cast<std::uint32_t>(e.backbone_position));
    }
    w.u32(static_cast<std::uint32_t>(model.partition_point()));

    w.u32(static_cast<std::uint32_t>(model.branches().size()));
    for (const auto& [key, branch] : model.branches()) {
        w.u32(key.first == kFinalSlot ? kFinalSlotWire : static_cast<std::uint32_t>(key.first));
        w.u32(static_cast<std::uint32_t>(key.second));
        w.f32(branch.temperature);
        write_sequential(w, branch.head);
    }
    return w.take();
}

EarlyExitModel load_model_from_reader(BinaryReader& r) {
    EarlyExitModel model;
    model.class_count_ = static_cast<int>(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank != 3) {
        throw FormatError(FormatError::Code::Malformed, "model input shape must be rank 3");
    }
    for (std::uint32_t i = 0; i < rank; ++i) model.input_shape_.push_back(static_cast<int>(r.u32()));

    model.backbone_ = read_sequential(r);

    const std::uint32_t exit_count = r.u32();
    int prev = 0;
    for (std::uint32_t i = 0; i < exit_count; ++i) {
        ExitPoint e;
        e.index = static_cast<int>(r.u32());
        e.backbone_position = static_cast<int>(r.u32());
        if (e.backbone_position <= prev || e.backbone_position > model.backbone_.size()) {
            throw FormatError(FormatError::Code::Malformed, "exit positions must be strictly increasing");
        }
        prev = e.backbone_position;
        model.exit_points_.push_back(e);
    }
    model.partition_point_ = static_cast<int>(r.u32());
    if (model.exit_points_.empty() ||
        model.partition_point_ != model.exit_points_.back().backbone_position) {
        throw FormatError(FormatError::Code::Malformed,
                          "partition point must sit at the last side exit");
    }

    const std::uint32_t branch_count = r.u32();
    for (std::uint32_t i = 0; i < branch_count; ++i) {
        const std::uint32_t raw_slot = r.u32();
        const int slot = raw_slot == kFinalSlotWire ? kFinalSlot : static_cast<int>(raw_slot);
        const std::uint32_t kind_raw = r.u32();
        if (kind_raw > static_cast<std::uint32_t>(DistortionKind::Noise)) {
            throw FormatError(FormatError::Code::Malformed, "unknown distortion kind in checkpoint");
        }
        Branch b;
        b.expert_kind = static_cast<DistortionKind>(kind_raw);
        b.temperature = r.f32();
        if (!(b.temperature > 0.0f)) {
            throw FormatError(FormatError::Code::Malformed, "non-positive stored temperature");
        }
        b.head = read_sequential(r);
        model.branches_.emplace(EarlyExitModel::BranchKey{slot, b.expert_kind}, std::move(b));
    }
    model.rebuild_cost_tables();
    return model;
}

EarlyExitModel deserialize_model(std::span<const std::uint8_t> bytes) {
    BinaryReader r(bytes);
    r.expect_magic("EEXP");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(FormatError::Code::VersionMismatch,
                          "checkpoint version " + std::to_string(version) + ", this build reads " +
                          std::to_string(kCheckpointVersion));
    }
    const std::uint32_t artifact = r.u32();
    if (artifact != kArtifactModel) {
        throw FormatError(FormatError::Code::Malformed,
                          "not an early-exit model checkpoint (artifact kind " +
                          std::to_string(artifact) + ")");
    }
    EarlyExitModel model = load_model_from_reader(r);
    r.expect_end();
    return model;
}

void save_model(const EarlyExitModel& model, const std::filesystem::path& path) {
    BinaryWriter w;
    const auto bytes = serialize_model(model);
    w.bytes(bytes.data(), bytes.size());
    w.to_file(path);
}

EarlyExitModel load_model(const std::filesystem::path& path) {
    BinaryReader r = BinaryReader::from_file(path);
    std::vector<std::uint8_t> bytes(r.remaining());
    r.bytes(bytes.data(), bytes.size());
    return deserialize_model(bytes);
}

std::vector<std::uint8_t> serialize_backbone(const EarlyExitModel& model) {
    BinaryWriter w;
    write_sequential(w, model.backbone());
    return w.take();
}

} // namespace eeo
