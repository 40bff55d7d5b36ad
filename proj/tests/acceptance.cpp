// Acceptance suite: every shipped claim is verified end to end at its stated
// tolerance, one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eeo/checkpoint.hpp"
#include "eeo/dataset.hpp"
#include "eeo/distortion.hpp"
#include "eeo/distortion_classifier.hpp"
#include "eeo/metrics.hpp"
#include "eeo/model.hpp"
#include "eeo/netem.hpp"
#include "eeo/ops.hpp"
#include "eeo/services.hpp"
#include "eeo/sweep.hpp"
#include "eeo/training.hpp"
#include "eeo/wire.hpp"

#include "nn_checks.hpp"

using namespace eeo;
namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

namespace {

double seconds_since(SteadyClock::time_point t0) {
    return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Check {
    std::string detail;
    bool ok = true;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += "FAILED " + what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// ---- shared trained artifacts ------------------------------------------------

struct Artifacts {
    DatasetSplits data;
    EarlyExitModel model;
    DistortionClassifier classifier;
    double train_seconds = 0.0;
    fs::path dir;
};

constexpr const char* kDataset = "shapes-v1:6x600";
constexpr std::uint64_t kSeed = 7;
constexpr float kPTar = 0.8f;

Artifacts build_artifacts() {
    const auto t0 = SteadyClock::now();
    Artifacts a;
    a.dir = fs::path("acceptance_artifacts");
    fs::create_directories(a.dir);

    a.data = load_dataset(kDataset, kSeed);
    a.model = EarlyExitModel::build(default_backbone_specs(), default_input_shape(),
                                    a.data.train.class_count, 3, kSeed);

    std::ofstream log(a.dir / "train.log");
    TrainHyper pristine_hyper;
    pristine_hyper.seed = kSeed;
    pristine_hyper.max_epochs = 60;
    train_pristine(a.model, a.data, pristine_hyper, &log);

    TrainHyper expert_hyper = pristine_hyper;
    expert_hyper.max_epochs = 40;
    finetune_expert(a.model, DistortionKind::Blur, a.data, expert_hyper, &log);
    finetune_expert(a.model, DistortionKind::Noise, a.data, expert_hyper, &log);
    calibrate_all(a.model, a.data, kSeed);
    save_model(a.model, a.dir / "model.eexp");

    ClassifierTrainConfig ccfg;
    ccfg.seed = kSeed;
    a.classifier = train_distortion_classifier(a.data, ccfg, &log);
    save_classifier(a.classifier, a.dir / "dc.eexp");

    a.train_seconds = seconds_since(t0);
    return a;
}

// Per-cell evaluation with a forced expert kind (the "each DNN independently"
// protocol of the accuracy and on-device experiments).
struct Cell {
    std::vector<InferenceResult> results;
    std::vector<int> labels;
};

using CellKey = std::pair<DistortionKind /*expert*/, std::pair<DistortionKind, int> /*data*/>;

std::map<CellKey, Cell> evaluate_grid(const Artifacts& a) {
    std::map<CellKey, Cell> grid;
    std::vector<std::pair<DistortionKind, int>> data_cells{{DistortionKind::Pristine, 0}};
    for (float l : blur_levels()) data_cells.push_back({DistortionKind::Blur, static_cast<int>(l)});
    for (float l : noise_levels()) data_cells.push_back({DistortionKind::Noise, static_cast<int>(l)});

    for (const auto& [kind, level] : data_cells) {
        const LabeledDataset cell_data =
            kind == DistortionKind::Pristine
                ? a.data.test
                : distort_dataset(a.data.test, kind, static_cast<float>(level),
                                  Rng::derive(kSeed, static_cast<std::uint64_t>(kind) * 1000 +
                                                         static_cast<std::uint64_t>(level)));
        for (DistortionKind expert :
             {DistortionKind::Pristine, DistortionKind::Blur, DistortionKind::Noise}) {
            Cell cell;
            for (const auto& item : cell_data.items) {
                cell.results.push_back(
                    full_forward(a.model, expert, preprocess_image(item.image), kPTar));
                cell.labels.push_back(item.label);
            }
            grid[{expert, {kind, level}}] = std::move(cell);
        }
    }
    return grid;
}

double acc_of(const std::map<CellKey, Cell>& grid, DistortionKind expert, DistortionKind kind,
              int level) {
    const Cell& c = grid.at({expert, {kind, level}});
    return overall_accuracy(c.results, c.labels);
}

double ondev_of(const std::map<CellKey, Cell>& grid, DistortionKind expert, DistortionKind kind,
                int level) {
    return on_device_probability(grid.at({expert, {kind, level}}).results);
}

// ---- criteria ----------------------------------------------------------------

Outcome criterion_1_numeric_kernel() {
    const auto t0 = SteadyClock::now();
    Check c;

    int total_checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Sequential net = eeo::testing::random_small_net(rng, 3);
        const Tensor x = eeo::testing::random_tensor(eeo::testing::random_net_input_shape(net), rng, 0.0, 1.0);
        std::vector<int> labels;
        for (int n = 0; n < x.dim(0); ++n) labels.push_back(static_cast<int>(rng.uniform_below(3)));
        const auto stats = eeo::testing::gradient_check(net, x, labels);
        total_checked += stats.checked;
        c.require(stats.checked > 0, "net " + std::to_string(seed) + " checked no elements");
        c.require(stats.violations == 0,
                  "net " + std::to_string(seed) + " has " + std::to_string(stats.violations) +
                      " gradient violations (max rel err " + pct(stats.max_rel_err) + ")");
    }

    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const int K = 2 + static_cast<int>(rng.uniform_below(9));
        const Tensor z = eeo::testing::random_tensor({K}, rng, -40.0, 40.0);
        const Tensor p = softmax(z);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) sum += p[i];
        c.require(std::abs(sum - 1.0) < 1e-6, "softmax normalization off by " + pct(sum - 1.0));
        c.require(argmax({p.data(), p.size()}) == argmax({z.data(), z.size()}),
                  "softmax argmax not preserved");
    }

    const double secs = seconds_since(t0);
    c.require(secs < 60.0, "runtime " + pct(secs) + "s over the 1 min budget");
    c.note("20 nets, " + std::to_string(total_checked) + " gradient elements, " + pct(secs) + "s");
    return {c.ok, c.detail};
}

Outcome criterion_2_distortion_fidelity() {
    const auto t0 = SteadyClock::now();
    Check c;

    for (float sigma : blur_levels()) {
        const Tensor k = gaussian_kernel(sigma);
        c.require(k.dim(0) == static_cast<int>(4 * sigma + 1),
                  "kernel size for sigma " + pct(sigma));
        double sum = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) sum += k[i];
        c.require(std::abs(sum - 1.0) < 1e-6, "kernel sum for sigma " + pct(sigma));
    }

    ImageU8 gray(64, 64, 3);
    for (auto& p : gray.pixels) p = 128;
    for (float sigma : noise_levels()) {
        const ImageU8 noisy = apply_noise(gray, sigma, 2024);
        double sum = 0, sq = 0;
        for (std::size_t i = 0; i < noisy.pixels.size(); ++i) {
            const double d = static_cast<double>(noisy.pixels[i]) - 128.0;
            sum += d;
            sq += d * d;
        }
        const double n = static_cast<double>(noisy.pixels.size());
        const double std = std::sqrt(sq / n - (sum / n) * (sum / n));
        c.require(std::abs(std - sigma) / sigma < 0.05,
                  "noise std " + pct(std) + " vs sigma " + pct(sigma));
    }

    const double secs = seconds_since(t0);
    c.require(secs < 60.0, "runtime over budget");
    c.note(pct(secs) + "s");
    return {c.ok, c.detail};
}

Outcome criterion_3_expert_dominance(const std::map<CellKey, Cell>& grid, double train_secs) {
    Check c;
    const double slack = 0.01;

    for (int level : {4, 5}) {
        const double eb = acc_of(grid, DistortionKind::Blur, DistortionKind::Blur, level);
        const double ep = acc_of(grid, DistortionKind::Pristine, DistortionKind::Blur, level);
        const double en = acc_of(grid, DistortionKind::Noise, DistortionKind::Blur, level);
        c.require(eb >= ep - slack, "E_blur " + pct(eb) + " < E_pristine " + pct(ep) +
                                        " at blur " + std::to_string(level));
        c.require(eb >= en - slack, "E_blur " + pct(eb) + " < E_noise " + pct(en) + " at blur " +
                                        std::to_string(level));
    }
    for (int level : {30, 40}) {
        const double en = acc_of(grid, DistortionKind::Noise, DistortionKind::Noise, level);
        const double ep = acc_of(grid, DistortionKind::Pristine, DistortionKind::Noise, level);
        const double eb = acc_of(grid, DistortionKind::Blur, DistortionKind::Noise, level);
        c.require(en >= ep - slack, "E_noise " + pct(en) + " < E_pristine " + pct(ep) +
                                        " at noise " + std::to_string(level));
        c.require(en >= eb - slack, "E_noise " + pct(en) + " < E_blur " + pct(eb) + " at noise " +
                                        std::to_string(level));
    }
    const double p0 = acc_of(grid, DistortionKind::Pristine, DistortionKind::Pristine, 0);
    const double b0 = acc_of(grid, DistortionKind::Blur, DistortionKind::Pristine, 0);
    const double n0 = acc_of(grid, DistortionKind::Noise, DistortionKind::Pristine, 0);
    c.require(p0 >= b0 - slack && p0 >= n0 - slack,
              "E_pristine " + pct(p0) + " not best at level 0 (blur " + pct(b0) + ", noise " +
                  pct(n0) + ")");

    c.require(train_secs < 1800.0, "train+eval " + pct(train_secs) + "s over the ~30 min budget");
    c.note("level0 P/B/N " + pct(p0) + "/" + pct(b0) + "/" + pct(n0) + ", train " +
           pct(train_secs) + "s");
    return {c.ok, c.detail};
}

Outcome criterion_4_on_device(const std::map<CellKey, Cell>& grid) {
    Check c;
    for (int level : {30, 40}) {
        const double en = ondev_of(grid, DistortionKind::Noise, DistortionKind::Noise, level);
        const double ep = ondev_of(grid, DistortionKind::Pristine, DistortionKind::Noise, level);
        c.require(en >= ep + 0.05, "noise " + std::to_string(level) + ": E_noise " + pct(en) +
                                       " vs E_pristine " + pct(ep));
        c.note("noise" + std::to_string(level) + " " + pct(en) + "/" + pct(ep));
    }
    for (int level : {2, 3, 4}) {
        const double eb = ondev_of(grid, DistortionKind::Blur, DistortionKind::Blur, level);
        const double ep = ondev_of(grid, DistortionKind::Pristine, DistortionKind::Blur, level);
        c.require(eb >= ep + 0.05, "blur " + std::to_string(level) + ": E_blur " + pct(eb) +
                                       " vs E_pristine " + pct(ep));
        c.note("blur" + std::to_string(level) + " " + pct(eb) + "/" + pct(ep));
    }
    return {c.ok, c.detail};
}

Outcome criterion_5_calibration(Artifacts& a, const std::map<CellKey, Cell>& grid) {
    Check c;

    // Validation NLL at the fitted temperature never exceeds NLL at T=1, and
    // calibration never changes a prediction.
    for (DistortionKind kind :
         {DistortionKind::Pristine, DistortionKind::Blur, DistortionKind::Noise}) {
        const LabeledDataset val =
            kind == DistortionKind::Pristine
                ? a.data.validation
                : distort_dataset_uniform_levels(
                      a.data.validation, kind,
                      Rng::derive(kSeed, 0xCA1 + static_cast<std::uint64_t>(kind)));
        std::vector<int> labels;
        for (const auto& item : val.items) labels.push_back(item.label);

        for (int slot : a.model.slots()) {
            std::vector<float> logits_data;
            for (const auto& item : val.items) {
                Tensor h = preprocess_image(item.image);
                Shape s = h.shape();
                s.insert(s.begin(), 1);
                h = Tensor(s, h.vec());
                const int position = slot == kFinalSlot
                                         ? a.model.backbone().size()
                                         : a.model.exit_points()[static_cast<std::size_t>(slot - 1)]
                                               .backbone_position;
                h = a.model.backbone().forward_range(h, 0, position);
                const Tensor z = branch_logits(a.model, slot, kind, h);
                logits_data.insert(logits_data.end(), z.data(), z.data() + z.size());
            }
            Tensor all({static_cast<int>(labels.size()), a.model.class_count()},
                       std::move(logits_data));
            const float t_star = a.model.branch(slot, kind).temperature;
            const double nll_fit = nll_at_temperature(all, labels, t_star);
            const double nll_one = nll_at_temperature(all, labels, 1.0);
            c.require(nll_fit <= nll_one + 1e-9,
                      distortion_kind_name(kind) + "/" + exit_slot_name(slot) + " NLL " +
                          pct(nll_fit) + " > NLL(1) " + pct(nll_one));

            for (int n = 0; n < all.dim(0); ++n) {
                Tensor row({a.model.class_count()});
                for (int k = 0; k < all.dim(1); ++k) row[static_cast<std::size_t>(k)] = all.at2(n, k);
                if (calibrated_confidence(row, 1.0f).first !=
                    calibrated_confidence(row, t_star).first) {
                    c.require(false, "calibration changed a prediction at " +
                                         distortion_kind_name(kind) + "/" + exit_slot_name(slot));
                    break;
                }
            }
        }
    }

    // Matched-expert exit-3 conditional accuracy >= p_tar - 0.10.
    const int exit3 = a.model.exit_count();
    auto check_exit3 = [&](DistortionKind expert, DistortionKind kind, int level) {
        const Cell& cell = grid.at({expert, {kind, level}});
        const auto acc = exit_point_accuracy(cell.results, cell.labels, exit3);
        if (!acc) {
            c.require(false, "no samples exited at side3 for " + distortion_kind_name(kind) +
                                 " level " + std::to_string(level));
            return;
        }
        c.require(*acc >= kPTar - 0.10, distortion_kind_name(kind) + " level " +
                                            std::to_string(level) + " exit3 accuracy " + pct(*acc));
    };
    check_exit3(DistortionKind::Pristine, DistortionKind::Pristine, 0);
    for (float l : blur_levels()) check_exit3(DistortionKind::Blur, DistortionKind::Blur, static_cast<int>(l));
    for (float l : noise_levels()) check_exit3(DistortionKind::Noise, DistortionKind::Noise, static_cast<int>(l));

    return {c.ok, c.detail};
}

Outcome criterion_6_split_transparency() {
    const auto t0 = SteadyClock::now();
    Check c;

    // Codec round trips, bit-exact.
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        OffloadRequest req;
        req.model_id = "codec";
        req.kind = static_cast<DistortionKind>(rng.uniform_below(3));
        req.partition_point = 5;
        req.p_tar = static_cast<float>(rng.uniform(0.0, 1.0));
        req.payload = eeo::testing::random_tensor({1, 4, 3, 3}, rng, -3.0, 3.0);
        req.per_branch = {{1, static_cast<int>(rng.uniform_below(5)),
                           static_cast<float>(rng.uniform(0.0, 1.0))}};
        c.require(decode_request(encode_request(req)) == req, "codec round trip");
    }

    // Distributed inference equals single-process inference bit-exactly.
    const std::vector<LayerSpec> specs{
        LayerSpec::conv2d(3, 5, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(5, 7, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(7, 9, 3, 1, 1), LayerSpec::relu(),
    };
    EarlyExitModel model = EarlyExitModel::build(specs, {3, 16, 16}, 5, 3, 77);
    model.add_expert_set(DistortionKind::Blur);
    model.add_expert_set(DistortionKind::Noise);

    const CloudService cloud(model, "split");
    LoopbackTransport transport(&cloud);
    VirtualClock clock;
    EdgeConfig cfg;
    cfg.model_id = "split";
    cfg.p_tar = 0.45f;
    cfg.use_classifier = false;
    cfg.profile = *builtin_profile("sa-east-1");
    EdgeService edge(model, std::nullopt, cfg, &transport, &clock);

    int mismatches = 0, offloads = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        ImageU8 img(16, 16, 3);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_below(256));
        const DistortionKind kind = static_cast<DistortionKind>(rng.uniform_below(3));
        const InferenceResult want = full_forward(model, kind, preprocess_image(img), cfg.p_tar);
        const auto got = edge.handle_with_kind(img, kind);
        if (!(got.result == want)) ++mismatches;
        if (want.offloaded) ++offloads;
    }
    c.require(mismatches == 0, std::to_string(mismatches) + " distributed/local mismatches");
    c.require(offloads > 0 && offloads < 1000, "offload mix degenerate: " + std::to_string(offloads));

    const double secs = seconds_since(t0);
    c.require(secs < 120.0, "runtime " + pct(secs) + "s over the 2 min budget");
    c.note(std::to_string(offloads) + "/1000 offloaded, " + pct(secs) + "s");
    return {c.ok, c.detail};
}

Outcome criterion_7_latency(Artifacts& a, const std::map<CellKey, Cell>& grid) {
    const auto t0 = SteadyClock::now();
    Check c;

    const NetworkProfile sa = *builtin_profile("sa-east-1");
    const double d = emulate_transfer_ms(1000000, sa);
    c.require(std::abs(d - 98.0) <= 0.1, "emulate_transfer(1e6, sa-east-1) = " + pct(d));

    // Forced offload (p_tar = 1.0): latency follows the Table ordering.
    std::map<std::string, double> forced_mean;
    for (const char* name : {"sa-east-1", "us-west-1", "eu-west-3"}) {
        const CloudService cloud(a.model, "lat");
        LoopbackTransport transport(&cloud);
        VirtualClock clock;
        EdgeConfig cfg;
        cfg.model_id = "lat";
        cfg.p_tar = 1.0f;
        cfg.use_classifier = false;
        cfg.profile = *builtin_profile(name);
        EdgeService edge(a.model, std::nullopt, cfg, &transport, &clock);
        double total = 0.0;
        const int n = 100;
        for (int i = 0; i < n; ++i) {
            total += edge.handle_with_kind(a.data.test.items[static_cast<std::size_t>(i)].image,
                                           DistortionKind::Pristine)
                         .latency.total_ms;
        }
        forced_mean[name] = total / n;
    }
    c.require(forced_mean["eu-west-3"] > forced_mean["us-west-1"] &&
                  forced_mean["us-west-1"] > forced_mean["sa-east-1"],
              "forced-offload ordering sa/us/eu = " + pct(forced_mean["sa-east-1"]) + "/" +
                  pct(forced_mean["us-west-1"]) + "/" + pct(forced_mean["eu-west-3"]));

    // Expert mode is no slower than the baseline wherever criterion 4 holds.
    std::vector<std::pair<DistortionKind, int>> qualifying;
    for (int level : {30, 40}) {
        if (ondev_of(grid, DistortionKind::Noise, DistortionKind::Noise, level) >=
            ondev_of(grid, DistortionKind::Pristine, DistortionKind::Noise, level) + 0.05) {
            qualifying.push_back({DistortionKind::Noise, level});
        }
    }
    for (int level : {2, 3, 4}) {
        if (ondev_of(grid, DistortionKind::Blur, DistortionKind::Blur, level) >=
            ondev_of(grid, DistortionKind::Pristine, DistortionKind::Blur, level) + 0.05) {
            qualifying.push_back({DistortionKind::Blur, level});
        }
    }
    c.require(!qualifying.empty(), "criterion 4 held nowhere, nothing to compare");

    for (const auto& [kind, level] : qualifying) {
        const LabeledDataset cell_data =
            distort_dataset(a.data.test, kind, static_cast<float>(level),
                            Rng::derive(kSeed, static_cast<std::uint64_t>(kind) * 1000 +
                                                   static_cast<std::uint64_t>(level)));
        for (const char* name : {"sa-east-1", "us-west-1", "eu-west-3"}) {
            double mean_expert = 0.0, mean_baseline = 0.0;
            for (const bool expert_mode : {true, false}) {
                const CloudService cloud(a.model, "lat");
                LoopbackTransport transport(&cloud);
                VirtualClock clock;
                EdgeConfig cfg;
                cfg.model_id = "lat";
                cfg.p_tar = kPTar;
                cfg.use_classifier = expert_mode;
                cfg.profile = *builtin_profile(name);
                std::optional<DistortionClassifier> cls;
                if (expert_mode) cls = a.classifier;
                EdgeService edge(a.model, std::move(cls), cfg, &transport, &clock);
                double total = 0.0;
                for (const auto& item : cell_data.items) {
                    total += edge.handle(item.image).latency.total_ms;
                }
                (expert_mode ? mean_expert : mean_baseline) =
                    total / static_cast<double>(cell_data.items.size());
            }
            c.require(mean_expert <= mean_baseline,
                      distortion_kind_name(kind) + std::to_string(level) + "@" + name +
                          ": expert " + pct(mean_expert) + "ms > baseline " + pct(mean_baseline) +
                          "ms");
        }
    }

    const double secs = seconds_since(t0);
    c.require(secs < 300.0, "runtime " + pct(secs) + "s over the 5 min budget");
    c.note(std::to_string(qualifying.size()) + " qualifying cells, " + pct(secs) + "s");
    return {c.ok, c.detail};
}

Outcome criterion_8_classifier(Artifacts& a) {
    Check c;
    const ConfusionMatrix blur5 = evaluate_distortion_classifier(
        a.classifier, a.data.test, DistortionKind::Blur, 5.0f, Rng::derive(kSeed, 801));
    const ConfusionMatrix noise40 = evaluate_distortion_classifier(
        a.classifier, a.data.test, DistortionKind::Noise, 40.0f, Rng::derive(kSeed, 802));
    const ConfusionMatrix pristine = evaluate_distortion_classifier(
        a.classifier, a.data.test, DistortionKind::Pristine, 0.0f, Rng::derive(kSeed, 803));

    const double blur_recall = blur5.recall(DistortionKind::Blur);
    const double noise_recall = noise40.recall(DistortionKind::Noise);
    const double pristine_recall = pristine.recall(DistortionKind::Pristine);
    c.require(blur_recall >= 0.95, "blur5 accuracy " + pct(blur_recall));
    c.require(noise_recall >= 0.95, "noise40 accuracy " + pct(noise_recall));
    c.require(pristine_recall >= 0.85, "pristine recall " + pct(pristine_recall));
    c.note("blur5 " + pct(blur_recall) + ", noise40 " + pct(noise_recall) + ", pristine " +
           pct(pristine_recall));

    std::ofstream cm(a.dir / "confusion.csv");
    cm << pristine.to_csv();
    return {c.ok, c.detail};
}

Outcome criterion_9_recount(Artifacts& a) {
    Check c;
    ExperimentConfig cfg;
    cfg.model_path = (a.dir / "model.eexp").string();
    cfg.classifier_path = (a.dir / "dc.eexp").string();
    cfg.dataset = kDataset;
    cfg.seed = kSeed;
    cfg.p_tar = kPTar;
    cfg.blur_grid = {1, 5};
    cfg.noise_grid = {10, 40};
    cfg.profiles = {*builtin_profile("sa-east-1"), *builtin_profile("eu-west-3")};
    cfg.out_dir = (a.dir / "sweep").string();

    const SweepResult result = run_sweep(cfg);
    c.require(result.rows.size() == 5 * 2 * 2, "row count " + std::to_string(result.rows.size()));

    const auto recounted = recount_from_trace(result.trace_path, a.model.exit_count());
    c.require(recounted.size() == result.rows.size(), "recount row count");

    std::ifstream csv(result.csv_path);
    std::string header, line;
    std::getline(csv, header);
    c.require(header == csv_header(a.model.exit_count()), "CSV header");
    for (const SweepRow& row : recounted) {
        if (!std::getline(csv, line)) {
            c.require(false, "CSV shorter than the trace");
            break;
        }
        if (line != csv_row(row)) {
            c.require(false, "recount mismatch on row '" + line + "'");
            break;
        }
    }
    c.note(std::to_string(result.rows.size()) + " rows recounted exactly");
    return {c.ok, c.detail};
}

} // namespace

int main() {
    std::vector<std::pair<std::string, Outcome>> report;
    const auto t_all = SteadyClock::now();

    report.emplace_back("1 numeric kernel", criterion_1_numeric_kernel());
    report.emplace_back("2 distortion fidelity", criterion_2_distortion_fidelity());
    report.emplace_back("6 split transparency", criterion_6_split_transparency());

    std::printf("training artifacts (%s, seed %llu)...\n", kDataset,
                static_cast<unsigned long long>(kSeed));
    std::fflush(stdout);
    Artifacts artifacts = build_artifacts();
    std::printf("trained in %.0fs; evaluating the forced-expert grid...\n", artifacts.train_seconds);
    std::fflush(stdout);
    const auto grid_t0 = SteadyClock::now();
    const std::map<CellKey, Cell> grid = evaluate_grid(artifacts);
    const double eval_secs = seconds_since(grid_t0);

    report.emplace_back("3 expert-match dominance",
                        criterion_3_expert_dominance(grid, artifacts.train_seconds + eval_secs));
    report.emplace_back("4 on-device probability", criterion_4_on_device(grid));
    report.emplace_back("5 calibration contract", criterion_5_calibration(artifacts, grid));
    report.emplace_back("7 latency model", criterion_7_latency(artifacts, grid));
    report.emplace_back("8 distortion classifier", criterion_8_classifier(artifacts));
    report.emplace_back("9 metrics recount", criterion_9_recount(artifacts));

    // Stable criterion order in the printed report.
    std::sort(report.begin(), report.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    int failures = 0;
    std::printf("\n");
    for (const auto& [name, outcome] : report) {
        std::printf("[%s] %-26s %s%s%s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                    outcome.detail.empty() ? "" : "(", outcome.detail.c_str(),
                    outcome.detail.empty() ? "" : ")");
        if (!outcome.pass) ++failures;
    }
    std::printf("\n%d/%zu criteria passed in %.0fs\n", static_cast<int>(report.size()) - failures,
                report.size(), seconds_since(t_all));
    return failures;
}
