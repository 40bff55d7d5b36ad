#include "eeo/distortion_classifier.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "eeo/checkpoint.hpp"
#include "eeo/errors.hpp"
#include "eeo/ops.hpp"
#include "eeo/optim.hpp"
#include "eeo/rng.hpp"

namespace eeo {

namespace {

std::vector<LayerSpec> classifier_specs(int spectrum_size) {
    const int flat = 16 * (spectrum_size / 4) * (spectrum_size / 4);
    return {
        LayerSpec::conv2d(1, 8, 3, 1, 1),  LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(8, 16, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::flatten(),              LayerSpec::dense(flat, 3),
    };
}

struct SpectrumSet {
    std::vector<Tensor> spectra;  // [S,S]
    std::vector<int> labels;      // DistortionKind as int
};

// One pristine plus one blurred and one noisy copy per image.
SpectrumSet build_spectrum_set(const LabeledDataset& ds, int spectrum_size, std::uint64_t seed) {
    SpectrumSet set;
    Rng rng(seed);
    for (const auto& item : ds.items) {
        set.spectra.push_back(extract_spectrum(item.image, spectrum_size));
        set.labels.push_back(static_cast<int>(DistortionKind::Pristine));

        const float blur_lvl =
            blur_levels()[static_cast<std::size_t>(rng.uniform_below(blur_levels().size()))];
        set.spectra.push_back(extract_spectrum(apply_blur(item.image, blur_lvl), spectrum_size));
        set.labels.push_back(static_cast<int>(DistortionKind::Blur));

        const float noise_lvl =
            noise_levels()[static_cast<std::size_t>(rng.uniform_below(noise_levels().size()))];
        set.spectra.push_back(
            extract_spectrum(apply_noise(item.image, noise_lvl, rng.next_u64()), spectrum_size));
        set.labels.push_back(static_cast<int>(DistortionKind::Noise));
    }
    return set;
}

Tensor spectra_batch(const SpectrumSet& set, std::span<const std::size_t> idx, int spectrum_size) {
    Tensor batch({static_cast<int>(idx.size()), 1, spectrum_size, spectrum_size});
    const std::size_t plane = static_cast<std::size_t>(spectrum_size) * spectrum_size;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Tensor& s = set.spectra[idx[i]];
        std::copy(s.data(), s.data() + plane, batch.data() + i * plane);
    }
    return batch;
}

double eval_loss(Sequential& net, const SpectrumSet& set, int spectrum_size, int batch_size,
                 double* accuracy) {
    double loss_sum = 0.0;
    int correct = 0;
    std::vector<std::size_t> idx(set.spectra.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::size_t pos = 0;
    while (pos < idx.size()) {
        const std::size_t take = std::min<std::size_t>(batch_size, idx.size() - pos);
        const std::span<const std::size_t> bidx(idx.data() + pos, take);
        const Tensor batch = spectra_batch(set, bidx, spectrum_size);
        std::vector<int> labels;
        for (std::size_t i : bidx) labels.push_back(set.labels[i]);
        const Tensor logits = net.forward(batch);
        loss_sum += cross_entropy_loss(logits, labels) * static_cast<double>(take);
        for (std::size_t i = 0; i < take; ++i) {
            const std::span<const float> row{logits.data() + i * 3, 3};
            if (argmax(row) == labels[i]) ++correct;
        }
        pos += take;
    }
    if (accuracy) *accuracy = static_cast<double>(correct) / static_cast<double>(set.spectra.size());
    return loss_sum / static_cast<double>(set.spectra.size());
}

} // namespace

DistortionClassifier::DistortionClassifier(Sequential net, int spectrum_size)
    : net_(std::move(net)), spectrum_size_(spectrum_size) {}

DistortionKind DistortionClassifier::classify(const ImageU8& img) const {
    const Tensor logits = logits_for(extract_spectrum(img, spectrum_size_));
    return static_cast<DistortionKind>(argmax({logits.data(), logits.size()}));
}

Tensor DistortionClassifier::logits_for(const Tensor& spectrum) const {
    require_shape(spectrum, {spectrum_size_, spectrum_size_}, "spectrum feature");
    const Tensor batch({1, 1, spectrum_size_, spectrum_size_}, spectrum.vec());
    const Tensor out = net_.forward(batch);
    return Tensor({out.dim(1)}, out.vec());
}

std::size_t DistortionClassifier::mac_count() const {
    return net_.mac_count({1, 1, spectrum_size_, spectrum_size_});
}

DistortionClassifier train_distortion_classifier(const DatasetSplits& data,
                                                 const ClassifierTrainConfig& cfg,
                                                 std::ostream* log) {
    if (data.train.items.empty() || data.validation.items.empty()) {
        throw ValueError("train_distortion_classifier: empty train or validation split");
    }

    const SpectrumSet train_set =
        build_spectrum_set(data.train, cfg.spectrum_size, Rng::derive(cfg.seed, 0x70));
    const SpectrumSet val_set =
        build_spectrum_set(data.validation, cfg.spectrum_size, Rng::derive(cfg.seed, 0x71));

    Sequential net(classifier_specs(cfg.spectrum_size));
    Rng init_rng(Rng::derive(cfg.seed, 0x72));
    for (int i = 0; i < net.size(); ++i) init_layer(net.layer(i), init_rng);

    auto params = net.parameters();
    std::vector<Tensor> best;
    double best_loss = HUGE_VAL;
    int since_best = 0;
    int step = 0;

    std::vector<std::size_t> order(train_set.spectra.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batches = order.size() / static_cast<std::size_t>(cfg.batch_size);
    if (batches == 0) throw ValueError("classifier training set smaller than one batch");

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(cfg.seed, 0x100 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        const double lr = cosine_annealing_lr(cfg.lr, 0.0, epoch, cfg.max_epochs);

        double train_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size,
                                                   static_cast<std::size_t>(cfg.batch_size));
            const Tensor batch = spectra_batch(train_set, idx, cfg.spectrum_size);
            std::vector<int> labels;
            for (std::size_t i : idx) labels.push_back(train_set.labels[i]);

            net.zero_grads();
            const Tensor logits = net.forward_cached(batch);
            train_loss += cross_entropy_loss(logits, labels);
            net.backward(cross_entropy_grad(logits, labels));
            ++step;
            adam_step(params, lr, cfg.weight_decay, step);
        }

        double val_acc = 0.0;
        const double val_loss = eval_loss(net, val_set, cfg.spectrum_size, cfg.batch_size, &val_acc);
        if (log) {
            *log << "epoch=" << epoch << " split=validation loss=" << val_loss
                 << " acc=" << val_acc << "\n";
        }
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best.clear();
            for (Parameter* p : params) best.push_back(p->value);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (!best.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    }
    net.drop_caches();
    return DistortionClassifier(std::move(net), cfg.spectrum_size);
}

double ConfusionMatrix::accuracy() const {
    int diag = 0, total = 0;
    for (int t = 0; t < 3; ++t) {
        for (int p = 0; p < 3; ++p) {
            total += counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            if (t == p) diag += counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        }
    }
    return total ? static_cast<double>(diag) / total : 0.0;
}

double ConfusionMatrix::recall(DistortionKind kind) const {
    const auto t = static_cast<std::size_t>(kind);
    int row = 0;
    for (int p = 0; p < 3; ++p) row += counts[t][static_cast<std::size_t>(p)];
    return row ? static_cast<double>(counts[t][t]) / row : 0.0;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream os;
    os << "true\\pred,pristine,blur,noise\n";
    const char* names[] = {"pristine", "blur", "noise"};
    for (int t = 0; t < 3; ++t) {
        os << names[t];
        for (int p = 0; p < 3; ++p) {
            os << ',' << counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        }
        os << '\n';
    }
    return os.str();
}

ConfusionMatrix evaluate_distortion_classifier(const DistortionClassifier& classifier,
                                               const LabeledDataset& images, DistortionKind kind,
                                               float level, std::uint64_t seed) {
    ConfusionMatrix cm;
    Rng rng(seed);
    for (const auto& item : images.items) {
        ImageU8 distorted = item.image;
        if (kind == DistortionKind::Blur) {
            distorted = apply_blur(item.image, level);
        } else if (kind == DistortionKind::Noise) {
            distorted = apply_noise(item.image, level, rng.next_u64());
        }
        const DistortionKind pred = classifier.classify(distorted);
        cm.counts[static_cast<std::size_t>(kind)][static_cast<std::size_t>(pred)]++;
    }
    return cm;
}

void save_classifier(const DistortionClassifier& classifier, const std::filesystem::path& path) {
    BinaryWriter w;
    w.magic("EEXP");
    w.u32(kCheckpointVersion);
    w.u32(kArtifactClassifier);
    w.u32(static_cast<std::uint32_t>(classifier.spectrum_size()));
    w.u32(static_cast<std::uint32_t>(classifier.net().size()));
    for (int i = 0; i < classifier.net().size(); ++i) write_layer(w, classifier.net().layer(i));
    w.to_file(path);
}

DistortionClassifier load_classifier(const std::filesystem::path& path) {
    BinaryReader r = BinaryReader::from_file(path);
    r.expect_magic("EEXP");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(FormatError::Code::VersionMismatch,
                          "classifier checkpoint version " + std::to_string(version) +
                          ", this build reads " + std::to_string(kCheckpointVersion));
    }
    const std::uint32_t artifact = r.u32();
    if (artifact != kArtifactClassifier) {
        throw FormatError(FormatError::Code::Malformed,
                          "not a distortion-classifier checkpoint (artifact kind " +
                          std::to_string(artifact) + ")");
    }
    const int spectrum_size = static_cast<int>(r.u32());
    Sequential net;
    const std::uint32_t layer_count = r.u32();
    for (std::uint32_t i = 0; i < layer_count; ++i) read_layer_into(r, net);
    r.expect_end();
    return DistortionClassifier(std::move(net), spectrum_size);
}

} // namespace eeo
