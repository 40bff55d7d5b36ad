#include "eeo/model.hpp"

#include <algorithm>
#include <cmath>

#include "eeo/errors.hpp"
#include "eeo/ops.hpp"
#include "eeo/optim.hpp"

namespace eeo {

std::string exit_slot_name(int slot) {
    return slot == kFinalSlot ? "final" : "side" + std::to_string(slot);
}

Tensor preprocess_image(const ImageU8& img) {
    Tensor t = image_to_tensor(img);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sum += t[i];
        sq += static_cast<double>(t[i]) * t[i];
    }
    const double n = static_cast<double>(t.size());
    const double mean = sum / n;
    const double std = std::sqrt(std::max(0.0, sq / n - mean * mean));
    const float inv = static_cast<float>(1.0 / (std + 1e-6));
    const float m = static_cast<float>(mean);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (t[i] - m) * inv;
    return t;
}

Tensor preprocess_batch(const std::vector<ImageU8>& images) {
    if (images.empty()) throw ValueError("preprocess_batch: empty batch");
    const ImageU8& first = images.front();
    Tensor batch({static_cast<int>(images.size()), first.channels, first.height, first.width});
    const std::size_t plane = static_cast<std::size_t>(first.channels) * first.height * first.width;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].height != first.height || images[i].width != first.width ||
            images[i].channels != first.channels) {
            throw ShapeError("preprocess_batch: image " + std::to_string(i) + " has mismatched dimensions");
        }
        const Tensor t = preprocess_image(images[i]);
        std::copy(t.data(), t.data() + plane, batch.data() + i * plane);
    }
    return batch;
}

std::vector<LayerSpec> default_backbone_specs(int in_channels) {
    // Five blocks with MAC costs arranged so the exit rule taps after blocks
    // 2, 3 and 4; every side branch then sees at least two convolutions of
    // context, which keeps branch confidence content-driven under distortion.
    return {
        LayerSpec::conv2d(in_channels, 6, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(6, 16, 3, 1, 1),          LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(16, 32, 3, 1, 1),         LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(32, 48, 3, 1, 1),         LayerSpec::relu(),
        LayerSpec::conv2d(48, 64, 3, 1, 1),         LayerSpec::relu(),
    };
}

std::string exit_taken_name(ExitTaken t) {
    switch (t) {
        case ExitTaken::Side: return "side";
        case ExitTaken::Final: return "final";
        case ExitTaken::Fallback: return "fallback";
    }
    return "unknown";
}

EarlyExitModel EarlyExitModel::build(const std::vector<LayerSpec>& backbone_specs, Shape input_chw,
                                     int class_count, int exit_count, std::uint64_t init_seed) {
    if (input_chw.size() != 3) throw ShapeError("model input shape must be [C,H,W]");
    if (class_count < 2) throw ValueError("model needs at least 2 classes");
    if (exit_count < 1) throw ValueError("model needs at least 1 side exit");

    EarlyExitModel model;
    model.backbone_ = Sequential(backbone_specs);
    model.class_count_ = class_count;
    model.input_shape_ = input_chw;
    model.rebuild_cost_tables();

    const int L = model.backbone_.size();
    if (L < exit_count + 1) throw ValueError("backbone too short for the requested exits");
    const std::size_t total_macs = model.macs_prefix_.back();

    // Side exits tap after the layers closest to the 25/50/75% cumulative MAC
    // marks (exit_count/(exit_count+1) fractions in general), kept strictly
    // increasing and strictly before the backbone end. Candidate positions
    // never split a Conv/Dense from its activation: those layers carry ~all
    // the MACs, so restricting to boundaries leaves the rule intact.
    std::vector<int> candidates;
    for (int p = 1; p <= L - 1; ++p) {
        if (!model.backbone_.layer(p - 1).spec().has_params()) candidates.push_back(p);
    }
    if (candidates.empty()) {
        for (int p = 1; p <= L - 1; ++p) candidates.push_back(p);
    }
    int prev = 0;
    for (int e = 1; e <= exit_count; ++e) {
        const double target =
            static_cast<double>(total_macs) * e / static_cast<double>(exit_count + 1);
        int best = -1;
        double best_err = 0.0;
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const int p = candidates[ci];
            if (p <= prev) continue;
            // Leave room for the remaining exits.
            if (candidates.size() - ci < static_cast<std::size_t>(exit_count - e + 1)) break;
            const double err =
                std::abs(static_cast<double>(model.macs_prefix_[static_cast<std::size_t>(p)]) - target);
            if (best < 0 || err < best_err) {
                best = p;
                best_err = err;
            }
        }
        if (best < 0) throw ValueError("backbone too short to place all side exits");
        model.exit_points_.push_back({e, best});
        prev = best;
    }
    model.partition_point_ = model.exit_points_.back().backbone_position;

    Rng rng(init_seed);
    for (int i = 0; i < L; ++i) init_layer(model.backbone_.layer(i), rng);
    for (int slot : model.slots()) {
        const Shape tap = model.tap_shape(slot);
        Branch b;
        b.expert_kind = DistortionKind::Pristine;
        b.head.add(LayerSpec::global_avg_pool());
        b.head.add(LayerSpec::dense(tap[0], class_count));
        for (int i = 0; i < b.head.size(); ++i) init_layer(b.head.layer(i), rng);
        model.branches_.emplace(BranchKey{slot, DistortionKind::Pristine}, std::move(b));
    }
    model.rebuild_cost_tables();
    return model;
}

void EarlyExitModel::rebuild_cost_tables() {
    macs_prefix_.assign(1, 0);
    Shape s = input_shape_;
    s.insert(s.begin(), 1);
    for (int i = 0; i < backbone_.size(); ++i) {
        const LayerSpec& spec = backbone_.layer(i).spec();
        macs_prefix_.push_back(macs_prefix_.back() + spec.mac_count(s));
        s = spec.output_shape(s);
    }
    branch_mac_table_.clear();
    for (const auto& [key, b] : branches_) {
        if (branch_mac_table_.count(key.first)) continue;
        Shape tap = tap_shape(key.first);
        tap.insert(tap.begin(), 1);
        branch_mac_table_[key.first] = b.head.mac_count(tap);
    }
}

std::vector<int> EarlyExitModel::slots() const {
    std::vector<int> out;
    for (const auto& e : exit_points_) out.push_back(e.index);
    out.push_back(kFinalSlot);
    return out;
}

Shape EarlyExitModel::tap_shape(int slot) const {
    Shape s = input_shape_;
    s.insert(s.begin(), 1);
    const int position = slot == kFinalSlot
                             ? backbone_.size()
                             : exit_points_.at(static_cast<std::size_t>(slot - 1)).backbone_position;
    for (int i = 0; i < position; ++i) s = backbone_.layer(i).spec().output_shape(s);
    s.erase(s.begin());
    return s;
}

bool EarlyExitModel::has_branch(int slot, DistortionKind kind) const {
    return branches_.count({slot, kind}) > 0;
}

Branch& EarlyExitModel::branch(int slot, DistortionKind kind) {
    const auto it = branches_.find({slot, kind});
    if (it == branches_.end()) {
        throw ValueError("no branch at exit " + exit_slot_name(slot) + " for kind " +
                         distortion_kind_name(kind));
    }
    return it->second;
}

const Branch& EarlyExitModel::branch(int slot, DistortionKind kind) const {
    const auto it = branches_.find({slot, kind});
    if (it == branches_.end()) {
        throw ValueError("no branch at exit " + exit_slot_name(slot) + " for kind " +
                         distortion_kind_name(kind));
    }
    return it->second;
}

std::vector<DistortionKind> EarlyExitModel::expert_kinds() const {
    std::vector<DistortionKind> kinds;
    for (const auto& [key, b] : branches_) {
        if (std::find(kinds.begin(), kinds.end(), key.second) == kinds.end()) {
            kinds.push_back(key.second);
        }
    }
    return kinds;
}

void EarlyExitModel::add_expert_set(DistortionKind kind) {
    if (finalized_) throw Error("model is finalized; no structural changes allowed");
    if (kind == DistortionKind::Pristine) {
        throw ValueError("the pristine expert set always exists; cannot re-add it");
    }
    for (int slot : slots()) {
        Branch clone = branch(slot, DistortionKind::Pristine);
        clone.expert_kind = kind;
        clone.temperature = 1.0f;
        branches_[BranchKey{slot, kind}] = std::move(clone);
    }
}

std::size_t EarlyExitModel::backbone_macs_before(int position) const {
    return macs_prefix_.at(static_cast<std::size_t>(position));
}

std::size_t EarlyExitModel::branch_macs(int slot) const {
    return branch_mac_table_.at(slot);
}

Tensor branch_logits(const EarlyExitModel& model, int slot, DistortionKind kind,
                     const Tensor& activations) {
    const Branch& b = model.branch(slot, kind);
    Tensor x = activations;
    if (x.rank() == 3) {
        Shape s = x.shape();
        s.insert(s.begin(), 1);
        x = Tensor(s, x.vec());
    }
    if (x.rank() != 4 || x.dim(0) != 1) {
        throw ShapeError("branch_logits expects a single sample, got " + shape_str(activations.shape()));
    }
    Shape expected = model.tap_shape(slot);
    expected.insert(expected.begin(), 1);
    require_shape(x, expected, "branch activations");
    const Tensor out = b.head.forward(x);
    return Tensor({out.dim(1)}, out.vec());
}

std::pair<int, float> calibrated_confidence(const Tensor& z, float temperature) {
    if (!(temperature > 0.0f)) {
        throw ValueError("temperature must be > 0, got " + std::to_string(temperature));
    }
    if (z.rank() != 1 || z.dim(0) < 2) {
        throw ShapeError("calibrated_confidence expects [K] logits, K >= 2");
    }
    const int K = z.dim(0);
    double zmax = -HUGE_VAL;
    for (int k = 0; k < K; ++k) {
        if (!std::isfinite(z[static_cast<std::size_t>(k)])) {
            throw ValueError("calibrated_confidence: non-finite logit");
        }
        zmax = std::max(zmax, static_cast<double>(z[static_cast<std::size_t>(k)]));
    }
    const double T = static_cast<double>(temperature);
    double denom = 0.0;
    for (int k = 0; k < K; ++k) {
        denom += std::exp((static_cast<double>(z[static_cast<std::size_t>(k)]) - zmax) / T);
    }
    int best = 0;
    for (int k = 1; k < K; ++k) {
        if (z[static_cast<std::size_t>(k)] > z[static_cast<std::size_t>(best)]) best = k;
    }
    const double conf = 1.0 / denom;  // exp(0)/denom at the max logit
    return {best, static_cast<float>(conf)};
}

bool decide_exit(float conf, float p_tar) { return conf >= p_tar; }

namespace {

Tensor lift_to_batch(const Tensor& input, const Shape& chw, const char* what) {
    Tensor x = input;
    if (x.rank() == 3) {
        Shape s = x.shape();
        s.insert(s.begin(), 1);
        x = Tensor(s, x.vec());
    }
    Shape expected = chw;
    expected.insert(expected.begin(), 1);
    require_shape(x, expected, what);
    return x;
}

BranchRecord evaluate_branch(const EarlyExitModel& model, int slot, DistortionKind kind,
                             const Tensor& acts) {
    const Tensor z = branch_logits(model, slot, kind, acts);
    const auto [cls, conf] = calibrated_confidence(z, model.branch(slot, kind).temperature);
    return BranchRecord{slot, cls, conf};
}

} // namespace

EdgeOutcome edge_forward(const EarlyExitModel& model, DistortionKind kind, const Tensor& input,
                         float p_tar) {
    const Tensor x = lift_to_batch(input, model.input_shape(), "edge_forward input");

    EdgeOutcome out;
    Tensor acts = x;
    int cursor = 0;
    for (const ExitPoint& exit : model.exit_points()) {
        acts = model.backbone().forward_range(acts, cursor, exit.backbone_position,
                                              &out.layers_executed, &out.macs_executed);
        cursor = exit.backbone_position;

        const BranchRecord rec = evaluate_branch(model, exit.index, kind, acts);
        out.macs_executed += model.branch_macs(exit.index);
        out.per_branch.push_back(rec);

        if (decide_exit(rec.confidence, p_tar)) {
            out.exited = true;
            out.result.predicted_class = rec.predicted_class;
            out.result.confidence = rec.confidence;
            out.result.exit_taken = ExitTaken::Side;
            out.result.exit_slot = exit.index;
            out.result.per_branch = out.per_branch;
            out.result.offloaded = false;
            return out;
        }
    }
    // No side branch was confident: ship the partition activations.
    out.exited = false;
    out.partition_activations = acts;
    return out;
}

InferenceResult cloud_forward(const EarlyExitModel& model, DistortionKind kind,
                              const Tensor& partition_activations,
                              const std::vector<BranchRecord>& per_branch, float p_tar,
                              std::size_t* macs_executed) {
    Shape expected = model.tap_shape(
        model.exit_points().back().index);
    const Tensor acts0 = lift_to_batch(partition_activations, expected, "cloud_forward activations");

    std::size_t macs = 0;
    const Tensor acts = model.backbone().forward_range(acts0, model.partition_point(),
                                                       model.backbone().size(), nullptr, &macs);
    const BranchRecord final_rec = evaluate_branch(model, kFinalSlot, kind, acts);
    macs += model.branch_macs(kFinalSlot);
    if (macs_executed) *macs_executed = macs;

    InferenceResult result;
    result.per_branch = per_branch;
    result.per_branch.push_back(final_rec);
    result.offloaded = true;

    if (decide_exit(final_rec.confidence, p_tar)) {
        result.predicted_class = final_rec.predicted_class;
        result.confidence = final_rec.confidence;
        result.exit_taken = ExitTaken::Final;
        result.exit_slot = kFinalSlot;
        return result;
    }

    // Most confident record wins; ties go to the earliest exit (strict >).
    const BranchRecord* best = nullptr;
    for (const BranchRecord& rec : result.per_branch) {
        if (!best || rec.confidence > best->confidence) best = &rec;
    }
    result.predicted_class = best->predicted_class;
    result.confidence = best->confidence;
    result.exit_taken = ExitTaken::Fallback;
    result.exit_slot = best->exit_slot;
    return result;
}

InferenceResult full_forward(const EarlyExitModel& model, DistortionKind kind, const Tensor& input,
                             float p_tar) {
    EdgeOutcome edge = edge_forward(model, kind, input, p_tar);
    if (edge.exited) return edge.result;
    return cloud_forward(model, kind, edge.partition_activations, edge.per_branch, p_tar);
}

double nll_at_temperature(const Tensor& logits, std::span<const int> labels, double temperature) {
    if (logits.rank() != 2) throw ShapeError("nll_at_temperature expects [N,K] logits");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) throw ShapeError("nll_at_temperature: label count mismatch");
    if (!(temperature > 0.0)) throw ValueError("temperature must be > 0");
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const float* z = logits.data() + static_cast<std::size_t>(n) * K;
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= K) throw ValueError("label out of range in calibration set");
        double zmax = -HUGE_VAL;
        for (int k = 0; k < K; ++k) zmax = std::max(zmax, static_cast<double>(z[k]));
        double denom = 0.0;
        for (int k = 0; k < K; ++k) denom += std::exp((static_cast<double>(z[k]) - zmax) / temperature);
        total += std::log(denom) - (static_cast<double>(z[y]) - zmax) / temperature;
    }
    return total / static_cast<double>(N);
}

float fit_temperature(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.dim(0) == 0) {
        throw ValueError("fit_temperature: empty validation logits");
    }
    const auto nll = [&](double t) { return nll_at_temperature(logits, labels, t); };

    double a = 0.05, b = 20.0;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = nll(c), fd = nll(d);
    while (b - a > 1e-3) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = nll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = nll(d);
        }
    }
    const double t_star = (a + b) / 2.0;
    // Never leave the branch worse than uncalibrated.
    if (nll(t_star) > nll(1.0)) return 1.0f;
    return static_cast<float>(t_star);
}

} // namespace eeo
